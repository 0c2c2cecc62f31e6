"""Template-expanded text description sets for every equation family.

Each family ships with >= 50 paraphrased descriptions spread over four
facets (equation properties, numerical method, physical interpretation,
solution features). Descriptions are produced by deterministic slot
filling -- subject phrase x property clause x closing clause -- from the
versioned pool file ``data/description_templates.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .catalog import EquationSpec
from .errors import TemplateExhausted


class Facet(Enum):
    EQUATION_PROPERTIES = "EquationProperties"
    NUMERICAL_METHOD = "NumericalMethod"
    PHYSICAL_INTERPRETATION = "PhysicalInterpretation"
    SOLUTION_FEATURE = "SolutionFeature"


MIN_DESCRIPTIONS = 50

_FACET_ORDER = (Facet.EQUATION_PROPERTIES, Facet.NUMERICAL_METHOD,
                Facet.PHYSICAL_INTERPRETATION, Facet.SOLUTION_FEATURE)


@dataclass(frozen=True)
class TextDescriptionSet:
    family_index: int
    descriptions: tuple[str, ...]
    facets: tuple[Facet, ...]        # parallel to descriptions

    def by_facet(self, facet: Facet) -> tuple[str, ...]:
        return tuple(d for d, f in zip(self.descriptions, self.facets)
                     if f is facet)


def _load_pools() -> dict:
    path = resources.files("molforge.data") / "description_templates.json"
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


_POOLS = _load_pools()


def _property_clauses(spec: EquationSpec, facet: Facet) -> list[str]:
    # Shock/rarefaction variants reuse the base family's wording except for
    # the solution-feature facet, which must state the jump label.
    base = spec.base_index if spec.base_index is not None else spec.index
    if spec.step_label is not None and facet is Facet.SOLUTION_FEATURE:
        return list(_POOLS["solution_feature_labels"][spec.step_label])
    return list(_POOLS["properties"][str(base)][facet.value])


def generate_descriptions(spec: EquationSpec) -> TextDescriptionSet:
    """Deterministically expand the template pools for one family."""
    texts: list[str] = []
    facets: list[Facet] = []
    seen: set[str] = set()
    for facet in _FACET_ORDER:
        pools = _POOLS["facets"][facet.value]
        props = _property_clauses(spec, facet)
        for prop in props:
            for subject in pools["subjects"]:
                for closing in pools["closings"]:
                    text = f"{subject} {prop}{closing}"
                    if text not in seen:
                        seen.add(text)
                        texts.append(text)
                        facets.append(facet)
    if len(texts) < MIN_DESCRIPTIONS:
        raise TemplateExhausted(
            f"family {spec.index}: only {len(texts)} distinct descriptions "
            f"(need >= {MIN_DESCRIPTIONS})")
    return TextDescriptionSet(family_index=spec.index,
                              descriptions=tuple(texts),
                              facets=tuple(facets))
