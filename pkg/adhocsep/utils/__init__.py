from .util import config_fingerprint, read_json, to_plain, write_json

__all__ = ["config_fingerprint", "read_json", "to_plain", "write_json"]
