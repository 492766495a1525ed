import json
from typing import Union

from core.exceptions import ParseError

DOCUMENT_ENCODING = "utf-8"
DOCUMENT_INDENT = 2


def parse_document(raw: Union[bytes, str], what: str = "document") -> dict:
    """
    Decode a UTF-8 JSON document.

    :param raw: File content.
    :type raw: Union[bytes, str]
    :param what: Human-readable name used in error messages.
    :type what: str
    :return: The decoded top-level object.
    :rtype: dict
    :raises ParseError: On undecodable bytes, malformed JSON or a non-object top level.
    """
    try:
        text = raw.decode(DOCUMENT_ENCODING) if isinstance(raw, (bytes, bytearray)) else raw
        data = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"Malformed {what}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"Malformed {what}: top level must be an object")
    return data


def render_document(data) -> bytes:
    """Serialize ``data`` as indented JSON with sorted keys so equal payloads give equal bytes."""
    return (json.dumps(data, indent=DOCUMENT_INDENT, sort_keys=True) + "\n").encode(DOCUMENT_ENCODING)
