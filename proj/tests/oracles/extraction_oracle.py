#!/usr/bin/env python3
"""Independent regex implementation of the answer-extraction rules.

Checks every row of a grading fixture file (JSONL with completion, task,
expected and optional gold/correct) and exits non-zero on any mismatch.
"""
import json
import re
import sys

def scope(text):
    idx = text.lower().rfind("answer is")
    return text if idx < 0 else text[idx + len("answer is"):]


def canon(sign, whole, frac):
    whole = whole.replace(",", "").lstrip("0") or "0"
    frac = (frac or "").lstrip(".").rstrip("0")
    out = whole + ("." + frac if frac else "")
    return "-" + out if sign and out != "0" else out


def extract(text, task):
    s = scope(text)
    if task == "arithmetic":
        last = ""
        pos = 0
        while True:
            # A number starts at a digit; the sign and '$' are lookbehind context.
            m = re.search(r"\d", s[pos:])
            if not m:
                return last
            start = pos + m.start()
            lead = s[:start]
            sign = ""
            if lead.endswith("$"):
                lead = lead[:-1]
            if lead.endswith("-") and (len(lead) < 2 or not lead[-2].isalnum()):
                sign = "-"
            g = re.match(r"(\d{1,3}(?:,\d{3})+(?!\d)|\d+)(\.\d+)?", s[start:])
            whole, frac = g.group(1), g.group(2)
            end = start + g.end()
            last = canon(sign, whole, frac)
            pos = end
    if task == "yesno":
        for tok in re.findall(r"[A-Za-z0-9]+", s):
            if tok.lower() in ("yes", "no"):
                return tok.lower()
        return ""
    if task == "symbolic":
        runs = re.findall(r"[A-Za-z]+", s)
        return runs[-1].lower() if runs else ""
    raise ValueError(task)


def grade(pred, gold, task):
    if not pred:
        return False
    if task == "arithmetic":
        try:
            return abs(float(pred) - float(gold)) <= 1e-6
        except ValueError:
            pass
    return pred == gold


def main(path):
    bad = 0
    counts = {}
    for n, line in enumerate(open(path, encoding="utf-8"), 1):
        if not line.strip():
            continue
        row = json.loads(line)
        counts[row["task"]] = counts.get(row["task"], 0) + 1
        got = extract(row["completion"], row["task"])
        if got != row["expected"]:
            bad += 1
            print(f"line {n}: extract {row['completion']!r} -> {got!r}, fixture says {row['expected']!r}")
        if "gold" in row:
            g = grade(got, row["gold"], row["task"])
            if g != row["correct"]:
                bad += 1
                print(f"line {n}: grade {got!r} vs {row['gold']!r} -> {g}, fixture says {row['correct']}")
    print(counts, "mismatches:", bad)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
