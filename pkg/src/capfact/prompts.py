"""Prompt templates for the corruption pipeline, evaluator tuning, and judging.

Templates are plain strings with {placeholder} slots filled by render().
Placeholders are lower_snake_case; rendering with a missing binding is an
error rather than a silent blank.
"""

from __future__ import annotations

import json
import re

TEMPLATE_NAMES = (
    "extract_objects",
    "extract_actions",
    "similar_object",
    "similar_action",
    "substitute",
    "evaluator",
    "judge",
)

EXTRACT_OBJECTS = """### Instruction:

Given the input text, generate a list of objects in the caption in the format of [ "Object1", "Object2", ...]. Don't include any verbs. ONLY REPLY THE ANSWER.

### Input: {caption}

### Output"""

EXTRACT_ACTIONS = """### Instruction:

Given the input text, generate a list of actions in the caption in the format of ["Action1", "Action2", ...]. ONLY REPLY THE ANSWER.

### Input: {caption}

### Output"""

SIMILAR_OBJECT = """### Instruction:

Find the parent class of the given object and generate one of its child class that has a different meaning but shares the same parent. The new class cannot be a synonym or similar terms to the original object. It can be an antonym or any co-hyponym. For example, generate "dog" for "cat". ONLY REPLY THE NEW CLASS.

### Input: {object}

### Output:"""

SIMILAR_ACTION = """### Instruction:

Find a different action that the subject can perform that has a different meaning than the input action. The new action cannot be a synonym or similar terms to the original action. For example, generate "put into" for "take out of". ONLY REPLY THE NEW ACTION.

### Input: {action}

### Output:"""

SUBSTITUTE = """### Instruction:

Substitute {old_obj_act} in {caption} as {new_obj_act}. Keep the answer in the same format as {caption}. ONLY REPLY THE ANSWER.

### Input: cap

### Output:"""

EVALUATOR_USER = """[[VIDEO]]
<caption>{caption}</caption> You are given a video and a caption describing the video content. Please rate the helpfulness, relevance, accuracy, level of details of the caption. The overall score should be on a scale of 1 to 5, where a higher score indicates better overall performance. Please first output a single line containing only one integer indicating the score. In the subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any potential bias. STRICTLY FOLLOW THE FORMAT."""

EVALUATOR = (
    "### USER:\n"
    + EVALUATOR_USER
    + """


### ASSISTANT:
{quality_score}

{explanation}"""
)

JUDGE = """[Context]
{ground_truth_caption}

[Caption]
{caption_to_evaluate}

[Groundtruth]
{ground_truth_explanation}
[End of Groundtruth]

[Assistant]
{predicted_explanation}
[End of Assistant]

[System]
We would like to request your feedback on the performance of an AI assistant in the response to the quality evaluation of the caption provided above with respect to a video. For your reference, the visual content in the video is represented with a few sentences describing the same video. You are also given a ground truth evaluation to that caption.
Please rate the helpfulness, relevance, accuracy, level of details of the response by comparing to the ground truth and referring to the context information. Provide an overall score on a scale of 1 to 10, where a higher score indicates better overall performance.

Please first output a single line containing the score. In the subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any potential bias."""

TEMPLATES = {
    "extract_objects": EXTRACT_OBJECTS,
    "extract_actions": EXTRACT_ACTIONS,
    "similar_object": SIMILAR_OBJECT,
    "similar_action": SIMILAR_ACTION,
    "substitute": SUBSTITUTE,
    "evaluator": EVALUATOR,
    "judge": JUDGE,
}

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class PromptError(ValueError):
    pass


def placeholders(template: str) -> list[str]:
    """Distinct placeholder names in first-appearance order."""
    seen: list[str] = []
    for match in _PLACEHOLDER.finditer(template):
        if match.group(1) not in seen:
            seen.append(match.group(1))
    return seen


def render(template: str, **bindings: str) -> str:
    """Fill every {slot}; unbound slots and unused bindings are errors."""
    names = placeholders(template)
    for name in names:
        if name not in bindings:
            raise PromptError(f"unbound placeholder: {name}")
    for name in bindings:
        if name not in names:
            raise PromptError(f"unknown binding: {name}")

    def repl(match: re.Match) -> str:
        return str(bindings[match.group(1)])

    return _PLACEHOLDER.sub(repl, template)


def render_named(name: str, **bindings: str) -> str:
    if name not in TEMPLATES:
        raise PromptError(f"unknown template: {name}")
    return render(TEMPLATES[name], **bindings)


def format_string_list(items: list[str]) -> str:
    """The bracketed quoted-list reply format the extraction prompts request."""
    return "[" + ", ".join(json.dumps(item, ensure_ascii=False) for item in items) + "]"


def parse_string_list(text: str) -> list[str]:
    """Parse a model reply shaped like ["a", "b"] into a list of strings.

    Tolerates surrounding prose by slicing from the first '[' to the last ']',
    single quotes, and bare comma-separated words inside brackets. Raises
    PromptError if no list can be recovered.
    """
    start = text.find("[")
    end = text.rfind("]")
    if start == -1 or end == -1 or end < start:
        raise PromptError(f"no bracketed list in reply: {text[:80]!r}")
    body = text[start : end + 1]
    try:
        parsed = json.loads(body)
    except json.JSONDecodeError:
        parsed = None
    if parsed is None:
        try:
            parsed = json.loads(body.replace("'", '"'))
        except json.JSONDecodeError:
            parsed = None
    if parsed is None:
        inner = body[1:-1].strip()
        if not inner:
            parsed = []
        else:
            parsed = [part.strip().strip("\"'") for part in inner.split(",")]
    if not isinstance(parsed, list) or not all(isinstance(p, str) for p in parsed):
        raise PromptError(f"reply list is not all strings: {text[:80]!r}")
    return [p.strip() for p in parsed if p.strip()]


def positive_explanation() -> str:
    return "The caption accurately captures the video content."


def negative_explanation(wrong_objects: list[str], wrong_actions: list[str]) -> str:
    """Template explanation naming the original (now-wrong) elements."""
    prefix = "The caption does not accurately capture the video content. For example, "
    obj = ", ".join(wrong_objects)
    act = ", ".join(wrong_actions)
    if wrong_objects and wrong_actions:
        return f"{prefix}the objects ({obj}) and actions ({act}) are incorrect."
    if wrong_objects:
        return f"{prefix}the objects ({obj}) are incorrect."
    if wrong_actions:
        return f"{prefix}the actions ({act}) are incorrect."
    raise PromptError("negative explanation needs at least one wrong element")
