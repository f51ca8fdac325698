from collections import OrderedDict

# criterion number -> list of (label, passed, detail), filled by test_acceptance
VERDICTS: "OrderedDict[int, list]" = OrderedDict()

CRITERIA = {
    1: "reference table of totals",
    2: "worked examples at one decimal",
    3: "closed-form moments vs summed posterior",
    4: "Gauss normalisation vs summed posterior",
    5: "Chapman dominance and partial-scenario mode",
    6: "flat-prior mean inside its error bracket",
    7: "simulator calibration",
    8: "property suites",
}


def record(criterion: int, label: str, passed: bool, detail: str = "") -> bool:
    VERDICTS.setdefault(criterion, []).append((label, bool(passed), detail))
    mark = "PASS" if passed else "FAIL"
    print(f"[{mark}] criterion {criterion} {label}: {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(VERDICTS):
        checks = VERDICTS[number]
        failed = [c for c in checks if not c[1]]
        mark = "FAIL" if failed else "PASS"
        line = f"[{mark}] criterion {number} ({CRITERIA.get(number, '')}): {len(checks) - len(failed)}/{len(checks)} checks"
        if failed:
            line += " | failing: " + "; ".join(f"{c[0]} ({c[2]})" for c in failed)
        tr.write_line(line)
