"""Hypothesis strategies producing brace-balanced Java-ish sources."""

from hypothesis import strategies as st

SIMPLE_LINES = st.sampled_from(
    [
        "a();",
        "int x = compute(1, 2);",
        'log.debug("m: {}");',
        "",
        "// note",
        "x = y + z;",
        'String s = "{unbalanced in literal";',
        "return;",
    ]
)


@st.composite
def java_lines(draw, depth=0):
    count = draw(st.integers(min_value=0, max_value=4))
    lines = []
    for _ in range(count):
        choices = ["stmt", "stmt", "if", "while"]
        if depth == 0:
            choices.append("method")
        kind = draw(st.sampled_from(choices))
        if kind == "stmt":
            lines.append(draw(SIMPLE_LINES))
        elif kind in ("if", "while") and depth < 3:
            header = "if (x) {" if kind == "if" else "while (x) {"
            inner = draw(java_lines(depth=depth + 1))
            lines.append(header)
            lines.extend("    " + line for line in inner)
            lines.append("}")
        elif kind == "method":
            inner = draw(java_lines(depth=depth + 1))
            lines.append(f"void m{draw(st.integers(0, 99))}() {{")
            lines.extend("    " + line for line in inner)
            lines.append("}")
        else:
            lines.append(draw(SIMPLE_LINES))
    return lines


def java_source():
    return java_lines().map(lambda lines: "\n".join(lines))
