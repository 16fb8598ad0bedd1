from exguard.javatext import (
    ApiPattern,
    brace_profile,
    camel_parts,
    content_terms,
    extract_api_patterns,
    first_unbalanced_line,
    identifier_tokens,
    mask_code,
)


def test_mask_preserves_line_structure():
    code = 'a = "x{y}"; // brace }\n/* {{{ */ b();'
    masked = mask_code(code)
    assert masked.count("\n") == code.count("\n")
    assert len(masked) == len(code)
    assert "{" not in masked
    assert "b();" in masked


def test_mask_char_literal_and_escapes():
    masked = mask_code("char c = '{'; String s = \"\\\"{\";")
    assert "{" not in masked


def test_brace_profile_trough_detects_else_line():
    masked = ["if (x) {", "    a();", "} else {", "    b();", "}"]
    profile = brace_profile(masked)
    assert profile[2] == (1, 1, 1, 0)  # dips to 0 mid-line, recovers


def test_first_unbalanced_line():
    assert first_unbalanced_line(["void f() {", "}"]) is None
    assert first_unbalanced_line(["}"]) == 1
    assert first_unbalanced_line(["void f() {", "  g();"]) == 2


def test_camel_parts():
    assert camel_parts("FileInputStream") == ["File", "Input", "Stream"]
    assert camel_parts("parseInt") == ["parse", "Int"]
    assert camel_parts("HTTPServer") == ["HTTP", "Server"]


def test_content_terms_drop_stop_words_and_keep_camel_splits():
    terms = content_terms("FileReader reader = new FileReader(path);")
    assert {"filereader", "file", "reader", "path"} <= terms
    assert "new" not in terms


def test_identifier_tokens():
    tokens = identifier_tokens('FileReader r = new FileReader(path); use(r); // Comment')
    assert "FileReader" in tokens
    assert "use" in tokens  # called
    assert "Comment" not in tokens  # masked away
    assert "new" not in tokens  # keyword


def test_string_literal_braces_do_not_count():
    masked = mask_code('String s = "{{{";')
    assert masked.count("{") == 0


def test_api_pattern_kinds():
    assert ApiPattern("type", "FileReader").matches(" FileReader r")
    assert not ApiPattern("type", "FileReader").matches("MyFileReaderX r")
    assert ApiPattern("member", "Integer.parseInt").matches("x = Integer.parseInt(s)")
    assert ApiPattern("member", "Integer.parseInt").matches("Integer . parseInt(s)")
    assert ApiPattern("constructor", "Socket").matches("new Socket(h, p)")
    assert not ApiPattern("constructor", "Socket").matches("Socket s;")


def test_extract_api_patterns_from_prose():
    prose = (
        "Reading with FileReader or opening a new Socket(host, port); "
        "converting with Integer.parseInt when text is bad."
    )
    keys = {p.key() for p in extract_api_patterns(prose)}
    assert "type:FileReader" in keys
    assert "constructor:Socket" in keys
    assert "member:Integer.parseInt" in keys
    # capitalized English words never qualify
    assert not any(k == "type:Reading" for k in keys)
