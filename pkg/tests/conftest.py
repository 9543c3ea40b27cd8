import pathlib
import sys

# Make the oracle helpers importable from any pytest invocation directory.
sys.path.insert(0, str(pathlib.Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed, detail in RESULTS:
        terminalreporter.write_line(
            f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        )
    good = sum(1 for _, passed, _ in RESULTS if passed)
    terminalreporter.write_line(f"{good}/{len(RESULTS)} criteria passed")
