"""Parser for vendor-style core-network configuration files.

The accepted grammar is the C-flavoured key/value style used by embedded
5G core configs: ``name: value`` pairs separated by commas or newlines,
objects in ``{}``, arrays in ``[]``, ``//`` and ``/* */`` comments, and
scalars that are double-quoted strings, decimal integers, booleans,
dotted-quad IPv4 addresses, or ``a.b.c.d/n`` CIDR blocks.

``parse_phys_config`` turns the text into a plain tree (dicts, lists,
scalars); ``extract_descriptor`` maps that tree onto a TwinDescriptor.
Both are pure functions.
"""

import ipaddress
import re
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import ConfigSyntaxError, DescriptorValidationError, ExtractionError
from .model import LinkProfile, SliceSpec, TwinDescriptor, validate_descriptor
from .model import DEFAULT_CAPTURE_INTERFACE, DEFAULT_WINDOW_SECONDS


@dataclass(frozen=True, slots=True)
class PhysConfigDocument:
    """Parse tree of one configuration file. Treat as read-only."""

    root: Mapping[str, Any]


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # ident string int bool ip cidr { } [ ] : , eof
    value: Any
    line: int
    col: int
    nl_before: bool


_IDENT_START = re.compile(r"[A-Za-z_]")
_IDENT_BODY = re.compile(r"[A-Za-z0-9_]")
_INT_RE = re.compile(r"^-?[0-9]+$")
_IP_RE = re.compile(r"^[0-9]+\.[0-9]+\.[0-9]+\.[0-9]+$")
_CIDR_RE = re.compile(r"^[0-9]+\.[0-9]+\.[0-9]+\.[0-9]+/[0-9]+$")

_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _bump(self, ch: str):
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        self.pos += 1

    def _error(self, message: str, line: int | None = None, col: int | None = None, expected: str = ""):
        raise ConfigSyntaxError(message, line if line is not None else self.line,
                                col if col is not None else self.col, expected)

    def tokens(self) -> list[_Token]:
        out: list[_Token] = []
        nl_pending = False
        text = self.text
        while True:
            # Skip whitespace and comments, remembering crossed newlines.
            while self.pos < len(text):
                ch = text[self.pos]
                if ch == "\n":
                    nl_pending = True
                    self._bump(ch)
                elif ch in " \t\r":
                    self._bump(ch)
                elif ch == "/" and text.startswith("//", self.pos):
                    while self.pos < len(text) and text[self.pos] != "\n":
                        self._bump(text[self.pos])
                elif ch == "/" and text.startswith("/*", self.pos):
                    start_line, start_col = self.line, self.col
                    self._bump("/")
                    self._bump("*")
                    while self.pos < len(text) and not text.startswith("*/", self.pos):
                        if text[self.pos] == "\n":
                            nl_pending = True
                        self._bump(text[self.pos])
                    if self.pos >= len(text):
                        self._error("unterminated block comment", start_line, start_col, "'*/'")
                    self._bump("*")
                    self._bump("/")
                else:
                    break
            if self.pos >= len(text):
                out.append(_Token("eof", None, self.line, self.col, nl_pending))
                return out
            line, col = self.line, self.col
            ch = text[self.pos]
            if ch in "{}[]:,":
                self._bump(ch)
                out.append(_Token(ch, ch, line, col, nl_pending))
            elif ch == '"':
                out.append(self._string(line, col, nl_pending))
            elif ch.isdigit() or ch == "-":
                out.append(self._number_like(line, col, nl_pending))
            elif _IDENT_START.match(ch):
                out.append(self._ident(line, col, nl_pending))
            else:
                self._error(f"unexpected character {ch!r}", line, col)
            nl_pending = False

    def _string(self, line: int, col: int, nl: bool) -> _Token:
        text = self.text
        self._bump('"')
        chars: list[str] = []
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == '"':
                self._bump(ch)
                return _Token("string", "".join(chars), line, col, nl)
            if ch == "\n":
                break
            if ch == "\\":
                self._bump(ch)
                if self.pos >= len(text):
                    break
                esc = text[self.pos]
                if esc not in _ESCAPES:
                    self._error(f"unknown escape '\\{esc}'")
                chars.append(_ESCAPES[esc])
                self._bump(esc)
            else:
                chars.append(ch)
                self._bump(ch)
        self._error("unterminated string", line, col, "closing '\"'")

    def _number_like(self, line: int, col: int, nl: bool) -> _Token:
        text = self.text
        start = self.pos
        if text[self.pos] == "-":
            self._bump("-")
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self._bump(text[self.pos])
        if self.pos < len(text) and text[self.pos] == "/" and self.pos + 1 < len(text) and text[self.pos + 1].isdigit():
            self._bump("/")
            while self.pos < len(text) and text[self.pos].isdigit():
                self._bump(text[self.pos])
        token = text[start:self.pos]
        if _INT_RE.match(token):
            return _Token("int", int(token), line, col, nl)
        if _IP_RE.match(token):
            try:
                value = ipaddress.ip_address(token)
            except ValueError:
                self._error(f"invalid IP address {token!r}", line, col)
            return _Token("ip", value, line, col, nl)
        if _CIDR_RE.match(token):
            try:
                value = ipaddress.ip_network(token, strict=True)
            except ValueError as exc:
                self._error(f"invalid CIDR {token!r}: {exc}", line, col)
            return _Token("cidr", value, line, col, nl)
        self._error(f"malformed numeric or address literal {token!r}", line, col)

    def _ident(self, line: int, col: int, nl: bool) -> _Token:
        text = self.text
        start = self.pos
        while self.pos < len(text) and _IDENT_BODY.match(text[self.pos]):
            self._bump(text[self.pos])
        word = text[start:self.pos]
        if word in ("true", "false"):
            return _Token("bool", word == "true", line, col, nl)
        return _Token("ident", word, line, col, nl)


_SCALAR_KINDS = ("string", "int", "bool", "ip", "cidr")


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def _peek(self) -> _Token:
        return self.tokens[self.i]

    def _next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _fail(self, tok: _Token, expected: str):
        found = "end of input" if tok.kind == "eof" else repr(tok.value if tok.value is not None else tok.kind)
        raise ConfigSyntaxError(f"unexpected {found}", tok.line, tok.col, expected)

    def document(self) -> dict[str, Any]:
        root = self._pairs("eof")
        return root

    def _pairs(self, closer: str) -> dict[str, Any]:
        entries: dict[str, Any] = {}
        sep_ok = True  # no separator required before the first entry
        while True:
            tok = self._peek()
            if tok.kind == closer:
                self._next()
                return entries
            if not sep_ok and not tok.nl_before:
                self._fail(tok, "',' or newline between entries")
            if tok.kind != "ident":
                self._fail(tok, "a field name" if sep_ok else f"a field name or '{closer}'")
            name = self._next()
            if name.value in entries:
                raise ConfigSyntaxError(f"duplicate field {name.value!r}", name.line, name.col)
            colon = self._next()
            if colon.kind != ":":
                self._fail(colon, "':'")
            entries[name.value] = self._value()
            sep_ok = self._eat_comma()

    def _eat_comma(self) -> bool:
        # A comma satisfies the separator rule outright; a newline before
        # the next token also counts, checked by the caller.
        tok = self._peek()
        if tok.kind == ",":
            self._next()
            return True
        return False

    def _value(self) -> Any:
        tok = self._peek()
        if tok.kind in _SCALAR_KINDS:
            return self._next().value
        if tok.kind == "{":
            self._next()
            return self._pairs("}")
        if tok.kind == "[":
            self._next()
            return self._array()
        self._fail(tok, "a value (string, integer, boolean, IP, CIDR, '{' or '[')")

    def _array(self) -> list[Any]:
        items: list[Any] = []
        sep_ok = True
        while True:
            tok = self._peek()
            if tok.kind == "]":
                self._next()
                return items
            if not sep_ok and not tok.nl_before:
                self._fail(tok, "',' or newline between elements")
            items.append(self._value())
            sep_ok = self._eat_comma()


def parse_phys_config(text: str) -> PhysConfigDocument:
    """Parse configuration text, consuming every byte of input.

    Raises ConfigSyntaxError with line/column and an expected-token hint
    on any malformed input; never raises anything else.
    """
    tokens = _Lexer(text).tokens()
    root = _Parser(tokens).document()
    return PhysConfigDocument(root=root)


# --- descriptor extraction --------------------------------------------------

_KNOWN_TOP = {
    "access_point_list",
    "ue_count",
    "network_name",
    "plmn",
    "capture_interface",
    "window_seconds",
}
_KNOWN_AP = {"apn", "ip", "cidr", "tun_bw", "tun_bw_dl", "tun_bw_ul", "qci"}

_ADDRESS_TYPES = (ipaddress.IPv4Address, ipaddress.IPv6Address)
_NETWORK_TYPES = (ipaddress.IPv4Network, ipaddress.IPv6Network)


def _typed(ap: Mapping[str, Any], key: str, kinds, path: str, type_name: str):
    if key not in ap:
        raise ExtractionError(f"{path}.{key}")
    value = ap[key]
    ok = isinstance(value, kinds) and not (kinds is int and isinstance(value, bool))
    if not ok:
        raise ExtractionError(f"{path}.{key}", f"expected {type_name}")
    return value


def extract_descriptor(
    doc: PhysConfigDocument,
    defaults: Mapping[str, Any] | None = None,
) -> tuple[TwinDescriptor, list[str]]:
    """Map a parsed physical configuration onto a TwinDescriptor.

    One slice is produced per access-point entry; scalar fields absent
    from the document are filled from ``defaults`` and then from built-in
    fallbacks. Returns the descriptor plus warnings for ignored unknown
    keys. Raises ExtractionError when required data is missing and
    DescriptorValidationError when the assembled descriptor is invalid.
    """
    defaults = dict(defaults or {})
    root = doc.root
    warnings = [f"ignored unknown key '{k}'" for k in root if k not in _KNOWN_TOP]

    if "access_point_list" not in root:
        raise ExtractionError("access_point_list")
    aps = root["access_point_list"]
    if not isinstance(aps, list):
        raise ExtractionError("access_point_list", "expected an array of access points")

    slices: list[SliceSpec] = []
    for i, ap in enumerate(aps):
        path = f"access_point_list[{i}]"
        if not isinstance(ap, dict):
            raise ExtractionError(path, "expected an object")
        warnings += [f"ignored unknown key '{path}.{k}'" for k in ap if k not in _KNOWN_AP]
        apn = _typed(ap, "apn", str, path, "string")
        gateway = _typed(ap, "ip", _ADDRESS_TYPES, path, "IP address")
        subnet = _typed(ap, "cidr", _NETWORK_TYPES, path, "CIDR block")
        # The vendor format carries one tunnel bandwidth; distinct
        # tun_bw_dl / tun_bw_ul keys override per direction when present.
        dl = ap.get("tun_bw_dl", ap.get("tun_bw"))
        ul = ap.get("tun_bw_ul", ap.get("tun_bw"))
        if dl is None or ul is None:
            raise ExtractionError(f"{path}.tun_bw")
        if not isinstance(dl, int) or not isinstance(ul, int) or isinstance(dl, bool) or isinstance(ul, bool):
            raise ExtractionError(f"{path}.tun_bw", "expected an integer bandwidth")
        qci = ap.get("qci", defaults.get("qci", 9))
        slices.append(
            SliceSpec(
                dnn=apn,
                subnet=str(subnet),
                gateway_ip=str(gateway),
                dl_bandwidth_bps=dl,
                ul_bandwidth_bps=ul,
                qci=qci,
            )
        )

    if "ue_count" in root:
        ue_count = root["ue_count"]
    elif "ue_count" in defaults:
        ue_count = defaults["ue_count"]
    else:
        raise ExtractionError("ue_count")
    if not isinstance(ue_count, int) or isinstance(ue_count, bool):
        raise ExtractionError("ue_count", "expected an integer")

    def pick(key: str, builtin):
        return root.get(key, defaults.get(key, builtin))

    link_profile = defaults.get("link_profile", LinkProfile())
    descriptor = TwinDescriptor(
        network_name=pick("network_name", "private-5g"),
        plmn=pick("plmn", "00101"),
        ue_count=ue_count,
        slices=tuple(slices),
        window_seconds=float(pick("window_seconds", DEFAULT_WINDOW_SECONDS)),
        capture_interface=pick("capture_interface", DEFAULT_CAPTURE_INTERFACE),
        link_profile=link_profile,
    )
    violations = validate_descriptor(descriptor)
    if violations:
        raise DescriptorValidationError(violations)
    return descriptor, warnings
