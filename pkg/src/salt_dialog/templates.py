"""Template pack: surface realisation and placeholder-anchored matching.

One declarative pack drives corpus generation, the reference belief tracker,
and live NLG, so the three can never drift apart.  Placeholders use the
``{name}`` syntax; user-side templates double as extraction patterns by
compiling each one into an anchored regex with named capture groups.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

from .belief import Slot
from .foodkb import data_path

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


class TemplateError(Exception):
    """A template placeholder has no binding."""

    def __init__(self, placeholder: str):
        super().__init__(f"unbound placeholder: {{{placeholder}}}")
        self.placeholder = placeholder


def placeholders(template: str) -> tuple[str, ...]:
    return tuple(_PLACEHOLDER.findall(template))


def render_template(template: str, bindings: Mapping[str, str]) -> str:
    """Substitute every placeholder; values should already be surface text."""

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise TemplateError(name)
        return str(bindings[name])

    rendered = _PLACEHOLDER.sub(substitute, template)
    if "{" in rendered or "}" in rendered:
        raise TemplateError(rendered)
    return rendered


@dataclass(frozen=True)
class TemplatePack:
    """All surface patterns, grouped by who utters them and why."""

    initial: tuple[str, ...]
    request: dict[Slot, tuple[str, ...]]
    answer: dict[Slot, tuple[str, ...]]
    change: dict[Slot, tuple[str, ...]]
    inform: tuple[str, ...]
    not_found: tuple[str, ...]
    unresolved: tuple[str, ...]

    @classmethod
    def load(cls, path: str | Path) -> "TemplatePack":
        data = json.loads(Path(path).read_text(encoding="utf-8"))

        def by_slot(section: str) -> dict[Slot, tuple[str, ...]]:
            return {Slot(name): tuple(items) for name, items in data.get(section, {}).items()}

        return cls(
            initial=tuple(data["initial"]),
            request=by_slot("request"),
            answer=by_slot("answer"),
            change=by_slot("change"),
            inform=tuple(data["inform"]),
            not_found=tuple(data.get("not_found", ())),
            unresolved=tuple(data.get("unresolved", ())),
        )

    @classmethod
    def default(cls) -> "TemplatePack":
        return cls.load(data_path("templates.json"))

    def user_templates(self) -> list[str]:
        """Every template a user turn can be built from (initial, answer, change)."""
        out = list(self.initial)
        for group in (self.answer, self.change):
            for variants in group.values():
                out.extend(variants)
        return out

    def system_templates(self) -> list[str]:
        """Every template the system renders replies from."""
        out: list[str] = []
        for variants in self.request.values():
            out.extend(variants)
        out.extend(self.inform)
        out.extend(self.not_found)
        out.extend(self.unresolved)
        return out


@dataclass(frozen=True)
class UtterancePattern:
    """A user template compiled into an anchored, case-insensitive regex."""

    template: str
    names: tuple[str, ...]
    regex: re.Pattern


def compile_user_patterns(pack: TemplatePack) -> list[UtterancePattern]:
    """Compile user templates for extraction, most specific first.

    Specificity order (more literal text, then more placeholders) makes sure
    e.g. "It is the {type} kind." is tried before "It is {cook}." on an
    utterance that both could match textually.
    """
    patterns = []
    for template in pack.user_templates():
        names = placeholders(template)
        literal_len = len(_PLACEHOLDER.sub("", template))
        parts = []
        last = 0
        for match in _PLACEHOLDER.finditer(template):
            parts.append(re.escape(template[last:match.start()]))
            parts.append(f"(?P<{match.group(1)}>.+?)")
            last = match.end()
        parts.append(re.escape(template[last:]))
        regex = re.compile(r"\s*" + "".join(parts) + r"\s*$", re.IGNORECASE)
        patterns.append((literal_len, len(names), UtterancePattern(template, names, regex)))
    patterns.sort(key=lambda item: (-item[0], -item[1], item[2].template))
    return [pattern for _, _, pattern in patterns]


def iter_matches(utterance: str, patterns: list[UtterancePattern]) -> Iterator[tuple[UtterancePattern, dict[str, str]]]:
    """All raw pattern matches for an utterance, in specificity order.

    Captured values are raw surface text; callers validate them against the
    vocabulary before trusting a match.
    """
    for pattern in patterns:
        match = pattern.regex.match(utterance)
        if match:
            yield pattern, {name: value.strip() for name, value in match.groupdict().items()}
