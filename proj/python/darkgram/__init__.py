"""Python access to the darkgram core."""

from ._darkgram import (
    EnvironmentError,
    InputError,
    Model,
    PermanentError,
    TransientError,
    damage_csv,
    decide_file,
    decide_url,
    default_config,
    detect_payload_kind,
    discover_replay,
    emoji_share,
    extract_links,
    generate_corpus,
    mann_whitney_u,
    overlap,
    parse_credential_stats,
    run_cli,
    stratified_split,
    tme_links,
)

__all__ = [
    "EnvironmentError",
    "InputError",
    "Model",
    "PermanentError",
    "TransientError",
    "damage_csv",
    "decide_file",
    "decide_url",
    "default_config",
    "detect_payload_kind",
    "discover_replay",
    "emoji_share",
    "extract_links",
    "generate_corpus",
    "main",
    "mann_whitney_u",
    "overlap",
    "parse_credential_stats",
    "run_cli",
    "stratified_split",
    "tme_links",
]


def main(argv=None):
    """Console entry point mirroring the C++ binary."""
    import sys

    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
