import pytest




@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], key, props.get("summary", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, summary in sorted(lines):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if outcome == 'passed' else 'FAIL'}  {summary}")
