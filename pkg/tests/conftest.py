import pathlib
import sys

# fixtures.py lives next to the tests and is imported as a plain module
sys.path.insert(0, str(pathlib.Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    # the acceptance module records one verdict per criterion; show them after the run
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(verdicts):
        ok, title, detail = verdicts[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {key} {title}: {detail}")
