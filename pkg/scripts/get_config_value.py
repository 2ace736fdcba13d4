#!/usr/bin/env python3
"""
Extract configuration values from config.yaml for shell scripts and Makefiles.

Usage:
    python scripts/get_config_value.py --section SECTION --key KEY [--fallback VALUE]
    python scripts/get_config_value.py --section SECTION --all-keys
    python scripts/get_config_value.py --section SECTION --check-required KEY1 KEY2 ...
    python scripts/get_config_value.py --section SECTION --get-flags

Examples:
    python scripts/get_config_value.py --section verify --key code_length
    python scripts/get_config_value.py --section EXPLORE --all-keys
    polar-autogen gen -N 64 -M 8 $(python scripts/get_config_value.py --section gen --get-flags)
"""

import argparse
import sys
from pathlib import Path

# Add the project root to the path so we can import config
proj_root = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(proj_root))

# Import after path modification
from polar_encoder_autogen.config import get_yaml_value, parse_yaml  # noqa: E402


def section_values(section, config_path=None):
    data = parse_yaml(config_path)
    return data.get(section) or {}


def to_flags(section_data):
    """
    Turn a config section into polar-autogen command-line flags.

    True booleans become bare flags, False and None are skipped, other
    scalars become ``--name value``.
    """
    flags = []
    for key, value in section_data.items():
        flag_name = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                flags.append(flag_name)
        elif isinstance(value, (int, float, str)):
            flags.append(f"{flag_name} {value}")
    return flags


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Extract configuration values from config.yaml for shell use"
    )
    parser.add_argument("--section", required=True, help="Configuration section name")
    parser.add_argument("--key", help="Key name (required unless another mode is chosen)")
    parser.add_argument("--fallback", help="Fallback value if key is not found")
    parser.add_argument("--config", type=Path, help="Config file (default: config.yaml)")
    parser.add_argument(
        "--all-keys", action="store_true", help="Print all key=value pairs in the section"
    )
    parser.add_argument(
        "--check-required",
        nargs="+",
        help="Check that all specified keys exist in the section (exit 1 if any missing)",
    )
    parser.add_argument(
        "--get-flags", action="store_true", help="Print the section as polar-autogen flags"
    )
    args = parser.parse_args(argv)

    try:
        if args.all_keys or args.get_flags or args.check_required:
            section_data = section_values(args.section, args.config)
            if not section_data:
                print(f"Error: Section [{args.section}] not found in config", file=sys.stderr)
                return 1

            if args.all_keys:
                for key, value in section_data.items():
                    print(f"{key}={value}")
            elif args.get_flags:
                print(" ".join(to_flags(section_data)))
            else:
                missing = [k for k in args.check_required if k not in section_data]
                if missing:
                    print(
                        f"Error: Missing required keys in [{args.section}]: {', '.join(missing)}",
                        file=sys.stderr,
                    )
                    return 1
                print("All required keys found")
            return 0

        if not args.key:
            print("Error: --key is required unless a listing mode is used", file=sys.stderr)
            return 1
        value = get_yaml_value([args.section, args.key], yaml_path=args.config, fallback=args.fallback)
        if value is None:
            print(f"Error: Key '{args.key}' not found in section [{args.section}]", file=sys.stderr)
            return 1
        print(value)
        return 0

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
