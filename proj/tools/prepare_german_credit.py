#!/usr/bin/env python3
"""Convert the raw UCI Statlog German Credit file (german.data) into the
headered CSV expected by data/schemas/german_credit.json.

The combined "personal status and sex" attribute (A9x) is split into a
marital-status column and a binary gender column so that gender can be
declared as a sensitive attribute on its own.

Usage: prepare_german_credit.py german.data german_credit.csv
"""

import csv
import sys

COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings", "employment", "installment_rate",
    "personal_status", "other_debtors", "residence_since", "property",
    "age", "installment_plans", "housing", "existing_credits", "job",
    "num_dependents", "telephone", "foreign_worker", "credit",
]

MARITAL = {
    "A91": "divorced_separated",
    "A92": "divorced_separated_married",
    "A93": "single",
    "A94": "married_widowed",
    "A95": "single",
}
GENDER = {"A91": "male", "A92": "female", "A93": "male", "A94": "male", "A95": "female"}
CREDIT = {"1": "good", "2": "bad"}


def main(src, dst):
    with open(src) as fin, open(dst, "w", newline="") as fout:
        writer = csv.writer(fout, lineterminator="\n")
        header = list(COLUMNS)
        header.insert(header.index("personal_status") + 1, "gender")
        writer.writerow(header)
        for line in fin:
            fields = line.split()
            if not fields:
                continue
            if len(fields) != len(COLUMNS):
                raise SystemExit(f"unexpected field count {len(fields)}: {line!r}")
            row = dict(zip(COLUMNS, fields))
            status = row["personal_status"]
            out = []
            for name in COLUMNS:
                if name == "personal_status":
                    out += [MARITAL[status], GENDER[status]]
                elif name == "credit":
                    out.append(CREDIT[row[name]])
                else:
                    out.append(row[name])
            writer.writerow(out)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    main(sys.argv[1], sys.argv[2])
