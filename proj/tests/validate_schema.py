"""Validate recorded API bodies against the session API schema.

Each line of the samples file is {"def": <name under $defs>, "body": <JSON>}.
Samples marked "valid": false must be rejected.
"""

import json
import sys

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError


def main() -> int:
    schema_path, samples_path = sys.argv[1], sys.argv[2]
    with open(schema_path, encoding="utf-8") as f:
        schema = json.load(f)
    Draft202012Validator.check_schema(schema)

    failures = 0
    seen = set()
    with open(samples_path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            sample = json.loads(line)
            name = sample["def"]
            seen.add(name)
            wrapper = dict(schema)
            wrapper["$ref"] = f"#/$defs/{name}"
            validator = Draft202012Validator(wrapper)
            expect_valid = sample.get("valid", True)
            try:
                validator.validate(sample["body"])
                ok = expect_valid
                detail = "accepted an invalid body"
            except ValidationError as e:
                ok = not expect_valid
                detail = e.message
            if not ok:
                failures += 1
                print(f"line {line_no} ({name}): {detail}\n  {json.dumps(sample['body'])[:300]}")

    required = {"create_request", "create_response", "next_response", "response_request",
                "response_result", "trace", "result", "error"}
    missing = required - seen
    if missing:
        print("no samples for:", ", ".join(sorted(missing)))
        failures += 1
    print(f"{failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
