import json

import pytest

from chunklab.corpus import Document


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name: str, records: list[dict]):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record) + "\n")
        return path

    return _write


@pytest.fixture
def doc():
    def _doc(doc_id: str, text: str, title: str = "") -> Document:
        return Document(id=doc_id, title=title, text=text)

    return _doc
