"""Hard-negative query synthesis: prompt, response parsing, offline mock.

Each positive question yields 20 related-but-unanswerable variants. The prompt
template is fixed text (the image reference stays in even for text-only
endpoints — the template is never altered); parsing is strict so a sloppy
generation fails loudly instead of silently training on garbage.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Callable

from .errors import ParseError, UsageError

VARIANT_COUNT = 20

PROMPT_TEMPLATE = """You are given the following question:
{question}

The image can answer this question.

Now, write 20 new questions that are:
- Related to the topic,
- Seem reasonable,
- But cannot be answered using the image.

These questions should require knowledge that is not in the image.

Do not rephrase the original.

Give exactly 20 new questions. Just list them:
Variant 1: ...
Variant 2: ...
Variant 3: ...
Variant 4: ...
Variant 5: ...
Variant 6: ...
...
"""


def render_hnqs_prompt(question: str) -> str:
    if not question.strip():
        raise UsageError("question must be non-empty")
    return PROMPT_TEMPLATE.format(question=question)


_VARIANT_RE = re.compile(r"^\s*Variant\s+(\d+)\s*:\s*(.*?)\s*$")


def parse_variants(response: str) -> list[str]:
    """Extract exactly 20 'Variant <n>: text' lines, in index order.

    Commentary lines are ignored; anything wrong with the variant lines
    themselves (missing index, duplicate, empty text, index past 20) is a
    format error.
    """
    found: dict[int, str] = {}
    order: list[int] = []
    for line in response.splitlines():
        m = _VARIANT_RE.match(line)
        if not m:
            continue
        idx = int(m.group(1))
        text = m.group(2)
        if not 1 <= idx <= VARIANT_COUNT:
            raise ParseError(f"variant index {idx} outside 1..{VARIANT_COUNT}")
        if idx in found:
            raise ParseError(f"duplicate variant index {idx}")
        if not text:
            raise ParseError(f"variant {idx} has empty text")
        found[idx] = text
        order.append(idx)
    if len(found) != VARIANT_COUNT:
        raise ParseError(f"expected {VARIANT_COUNT} variants, found {len(found)}")
    if order != sorted(order):
        raise ParseError("variant indices out of order")
    return [found[i] for i in range(1, VARIANT_COUNT + 1)]


@dataclass(frozen=True)
class HnqsRecord:
    query_id: str
    positive_question: str
    variants: tuple[str, ...]
    generator: str = "mock"  # "endpoint" | "mock"

    def __post_init__(self):
        if len(self.variants) != VARIANT_COUNT:
            raise UsageError(f"need exactly {VARIANT_COUNT} variants, got {len(self.variants)}")
        for i, v in enumerate(self.variants):
            if not v:
                raise UsageError(f"variant {i + 1} is empty")
            if v == self.positive_question:
                raise UsageError(f"variant {i + 1} repeats the positive question")


# Template bank for the offline generator. Every template leans on the
# original question's topic but asks for provenance, history, or context a
# single page cannot carry.
_MOCK_TEMPLATES = (
    "Who first raised the question “{q}” in the published literature?",
    "In what year did “{q}” become a standard survey item?",
    "Which committee is responsible for auditing the answer to “{q}”?",
    "How has the answer to “{q}” changed over the past decade?",
    "What methodology was used to collect the data behind “{q}”?",
    "Which other organizations report comparable figures for “{q}”?",
    "What is the forecast for next year regarding “{q}”?",
    "Who signed off on the figures relevant to “{q}”?",
    "What were the main criticisms of early answers to “{q}”?",
    "Which regulation governs disclosure of the answer to “{q}”?",
    "How do international standards define the terms used in “{q}”?",
    "What was the margin of error in the first study of “{q}”?",
    "Which university departments actively research “{q}”?",
    "What incentives exist for misreporting the answer to “{q}”?",
    "How much funding was allocated last year to studying “{q}”?",
    "Which conference first featured a keynote on “{q}”?",
    "What legal precedents bear on “{q}”?",
    "How is “{q}” typically taught in introductory courses?",
    "Which datasets outside this document also cover “{q}”?",
    "What did last year's independent review conclude about “{q}”?",
    "Who maintains the historical archive for records about “{q}”?",
    "What competing definitions exist for the quantity in “{q}”?",
    "How long does certification take for auditors of “{q}”?",
    "Which follow-up studies were commissioned after “{q}” was answered?",
)


def mock_generate(question: str, seed: int) -> list[str]:
    """Deterministic template-based stand-in for a VLM generator.

    Seeding mixes the question text in, so different questions at the same
    seed get different template subsets.
    """
    if not question.strip():
        raise UsageError("question must be non-empty")
    rng = random.Random(f"{seed}:{question}")
    topic = question.strip().rstrip("?").rstrip(".")
    picks = rng.sample(_MOCK_TEMPLATES, VARIANT_COUNT)
    return [t.format(q=topic) for t in picks]


def generate_record(
    query_id: str,
    question: str,
    seed: int = 0,
    client: Callable[[str], str] | None = None,
) -> HnqsRecord:
    """Produce one HNQS record, via a generation callable or the mock.

    `client` maps a rendered prompt to raw response text (endpoint adapter);
    its output goes through the strict parser.
    """
    if client is not None:
        variants = parse_variants(client(render_hnqs_prompt(question)))
        generator = "endpoint"
    else:
        variants = mock_generate(question, seed)
        generator = "mock"
    return HnqsRecord(
        query_id=query_id,
        positive_question=question,
        variants=tuple(variants),
        generator=generator,
    )


def hnqs_to_record(rec: HnqsRecord) -> dict:
    return {
        "query_id": rec.query_id,
        "positive_question": rec.positive_question,
        "variants": list(rec.variants),
        "generator": rec.generator,
    }


def hnqs_from_record(record: dict) -> HnqsRecord:
    try:
        return HnqsRecord(
            query_id=str(record["query_id"]),
            positive_question=str(record["positive_question"]),
            variants=tuple(str(v) for v in record["variants"]),
            generator=str(record.get("generator", "mock")),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed hnqs record: {exc}") from None
