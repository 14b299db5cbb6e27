"""Registry of the agent and evaluation prompt templates, shipped as data
files with typed placeholder substitution.

Placeholders use single braces, ``{item}``. Literal braces in stored bodies
are escaped by doubling (``{{`` and ``}}``), so rubric JSON examples render
back to plain braces. Rendered text never contains an unresolved placeholder,
and re-rendering a rendered text with no bindings is the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .errors import ExtraBinding, MissingBinding, UnknownTemplate

TEMPLATE_IDS: tuple[str, ...] = (
    "core_team_root",
    "content_creation_team",
    "copywriter",
    "image_researcher",
    "evaluation_team",
    "text_evaluator",
    "layout_evaluator",
    "background_evaluator",
    "graphic_revisor",
    "pairwise_eval",
    "six_way_eval",
    "single_agent_ablation",
    "style_prompting",
    "baseline_t2i_generator",
)

_TOKEN = re.compile(r"\{\{|\}\}|\{([a-z_][a-z0-9_]*)\}")


def _scan_placeholders(body: str) -> frozenset[str]:
    return frozenset(m.group(1) for m in _TOKEN.finditer(body) if m.group(1))


def _substitute(body: str, bindings: Mapping[str, str]) -> str:
    def repl(match: re.Match) -> str:
        token = match.group(0)
        if token == "{{":
            return "{"
        if token == "}}":
            return "}"
        return bindings[match.group(1)]

    return _TOKEN.sub(repl, body)


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    required_bindings: frozenset[str]

    def render(self, bindings: Mapping[str, str]) -> str:
        supplied = frozenset(bindings)
        missing = self.required_bindings - supplied
        if missing:
            raise MissingBinding(
                f"{self.template_id}: missing bindings {sorted(missing)}"
            )
        extra = supplied - self.required_bindings
        if extra:
            raise ExtraBinding(f"{self.template_id}: unexpected bindings {sorted(extra)}")
        return _substitute(self.body, bindings)


@lru_cache(maxsize=None)
def _load(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise UnknownTemplate(f"no template named {template_id!r}")
    body = (
        resources.files("mimo")
        .joinpath(f"templates/{template_id}.txt")
        .read_text(encoding="utf-8")
    )
    return PromptTemplate(
        template_id=template_id,
        body=body,
        required_bindings=_scan_placeholders(body),
    )


def get_template(template_id: str) -> PromptTemplate:
    return _load(template_id)


def render(template_id: str, bindings: Mapping[str, str]) -> str:
    """Substitute ``bindings`` into the template; pure and total over valid input."""
    return _load(template_id).render(bindings)


def list_templates() -> list[str]:
    """All template ids in stable registry order."""
    return list(TEMPLATE_IDS)
