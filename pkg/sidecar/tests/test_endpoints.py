import jsonschema

# A 50-text conformance fixture: plain prose, punctuation, numbers,
# repeated words, unicode, odd spacing, and single tokens.
FIXTURE_TEXTS = [
    "hi",
    "hello world",
    "The quick brown fox jumps over the lazy dog.",
    "Revenue grew by 3 percent over the previous quarter.",
    "a b c d e f g",
    "one",
    "Multiple   spaces   between   words",
    "Trailing space at the end ",
    "punctuation, everywhere! right? yes; indeed: quite.",
    "numbers 123 456 7890 mixed in",
    "CamelCase and UPPER and lower tokens",
    "hyphen-ated words stay whole",
    "café costs 4 euros",
    "élève résumé naïve",
    "tabs\tbetween\ttokens",
    "newlines\nbetween\nlines",
    "mixed \t whitespace \n runs",
    "word",
    "two words",
    "repeat repeat repeat repeat",
    "The dividend was maintained at the same level as before.",
    "Scouts use the same dance to argue for new nest sites.",
    "Ice flows slowly downhill under its own weight.",
    "Filter coffee rewards careful control of grind size.",
    "x",
    "xy zw",
    "a1 b2 c3",
    "symbols & ampersands % percent # hash",
    "quotes 'single' and \"double\" quoted",
    "parentheses (inside) and [brackets] and {braces}",
    "ellipsis ... and dashes -- here",
    "Sentence one. Sentence two. Sentence three.",
    "Question? Answer! Statement.",
    "short",
    "slightly longer text with several ordinary words inside",
    "THE SAME TEXT IN CAPITALS",
    "the same text in capitals",
    "unicode arrows ← → and bullets • listed",
    "emoji \U0001f41d in the middle",
    "very-long-token-" + "x" * 40,
    "0 1 2 3 4 5 6 7 8 9",
    "alpha beta gamma delta epsilon zeta eta theta",
    "Der schnelle braune Fuchs springt.",
    "El zorro marrón salta rápido.",
    "tokens  with   varying    gaps",
    "ends with punctuation!",
    "?starts with punctuation",
    "inner'apostrophe words don't split",
    "a.b.c dotted.tokens here",
    "final text of the fixture set",
]


def embed(client, texts, mode="tokens"):
    return client.post("/v1/embed", json={"texts": texts, "mode": mode})


# ------------------------------------------------------------------ info

def test_info_shape_and_schema(client, schema):
    response = client.get("/v1/info")
    assert response.status_code == 200
    payload = response.json()
    jsonschema.validate(payload, schema("info_response"))
    assert payload["dim"] == 64
    assert payload["max_concurrency"] >= 1


# ----------------------------------------------------------------- embed

def test_fixture_offsets_reconstruct_inputs_and_validate(client, schema):
    assert len(FIXTURE_TEXTS) == 50
    response = embed(client, FIXTURE_TEXTS)
    assert response.status_code == 200
    payload = response.json()
    jsonschema.validate(payload, schema("embed_response"))
    assert len(payload["results"]) == 50
    for text, result in zip(FIXTURE_TEXTS, payload["results"]):
        real = [t for t in result["tokens"] if not t["special"]]
        reconstructed = "".join(text[t["start"]:t["end"]] for t in real)
        assert reconstructed == text, f"offsets do not reconstruct {text!r}"
        assert len(result["vectors"]) == len(result["tokens"])
        assert all(len(v) == result["dim"] for v in result["vectors"])
        assert not result["truncated"]


def test_special_tokens_zero_width_and_flagged(client):
    result = embed(client, ["hello world"]).json()["results"][0]
    specials = [t for t in result["tokens"] if t["special"]]
    assert specials, "expected at least one special marker token"
    assert all(t["start"] == t["end"] for t in specials)


def test_embed_batch_order_preserved(client):
    payload = embed(client, ["first text", "second text"]).json()
    first, second = payload["results"]
    token = first["tokens"][1]  # first real token
    assert "first text"[token["start"]:token["end"]].startswith("first")
    token = second["tokens"][1]
    assert "second text"[token["start"]:token["end"]].startswith("second")


def test_embed_idempotent(client):
    a = embed(client, ["same request twice"]).json()
    b = embed(client, ["same request twice"]).json()
    assert a == b


def test_embed_empty_list_400(client):
    assert embed(client, []).status_code == 400


def test_embed_missing_texts_400(client):
    assert client.post("/v1/embed", json={"mode": "tokens"}).status_code == 400


def test_embed_unsupported_mode_400(client):
    assert embed(client, ["x"], mode="pooled").status_code == 400


def test_embed_truncation_flag(tiny_client):
    result = embed(tiny_client, ["one two three four five six"]).json()["results"][0]
    assert result["truncated"]
    real = [t for t in result["tokens"] if not t["special"]]
    assert len(real) == 4


# ---------------------------------------------------------------- rerank

def test_rerank_scores_parallel_and_schema(client, schema):
    response = client.post("/v1/rerank", json={
        "query": "solar power",
        "documents": ["solar power plant", "banana", "solar panels"],
    })
    assert response.status_code == 200
    payload = response.json()
    jsonschema.validate(payload, schema("rerank_response"))
    assert len(payload["scores"]) == 3
    assert payload["scores"][0] == 1.0
    assert payload["scores"][1] == 0.0


def test_rerank_duplicate_documents_equal_scores(client):
    payload = client.post("/v1/rerank", json={
        "query": "q terms",
        "documents": ["same text", "same text"],
    }).json()
    assert payload["scores"][0] == payload["scores"][1]


def test_rerank_missing_query_400(client):
    assert client.post("/v1/rerank", json={"documents": ["x"]}).status_code == 400


def test_rerank_empty_documents_400(client):
    assert client.post("/v1/rerank", json={"query": "q", "documents": []}).status_code == 400


# -------------------------------------------------------------- generate

def test_generate_deterministic(client, schema):
    request = {"prompt": "echo these words back to me please", "max_tokens": 4}
    first = client.post("/v1/generate", json=request)
    second = client.post("/v1/generate", json=request)
    assert first.status_code == 200
    jsonschema.validate(first.json(), schema("generate_response"))
    assert first.json() == second.json()
    assert first.json()["text"] == "echo these words back"


def test_generate_max_tokens_zero_empty(client):
    payload = client.post("/v1/generate",
                          json={"prompt": "anything", "max_tokens": 0}).json()
    assert payload["text"] == ""


def test_generate_bounded_by_max_tokens(client):
    payload = client.post("/v1/generate",
                          json={"prompt": "a b c d e f g h", "max_tokens": 3}).json()
    assert len(payload["text"].split()) <= 3


def test_generate_empty_prompt_400(client):
    assert client.post("/v1/generate",
                       json={"prompt": "", "max_tokens": 5}).status_code == 400


def test_generate_oversized_prompt_413_with_limit(tiny_client):
    prompt = " ".join(f"w{i}" for i in range(30))  # context_limit is 10
    response = tiny_client.post("/v1/generate", json={"prompt": prompt, "max_tokens": 5})
    assert response.status_code == 413
    assert response.json()["limit"] == 10


def test_generate_negative_max_tokens_400(client):
    assert client.post("/v1/generate",
                       json={"prompt": "x", "max_tokens": -1}).status_code == 400
