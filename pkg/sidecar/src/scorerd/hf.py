"""Pretrained backends over HuggingFace checkpoints (optional extra).

These restore full-fidelity scoring: an entailment classifier for
verification with true embedding-gradient saliency, a masked LM for
pseudo-log-likelihood, and a sequence-to-sequence fill-in model whose task
prefixes select the word ("substituted word:") or entity ("substituted
entity:") generation mode. All inference runs deterministically in eval
mode. Requires the "hf" extra and downloadable or locally cached weights;
resolution failures surface as ModelError at startup.
"""

from __future__ import annotations

import math

import torch

from .backends import ModelError

try:  # pragma: no cover - exercised only when transformers is installed
    from transformers import (
        AutoModelForMaskedLM,
        AutoModelForSeq2SeqLM,
        AutoModelForSequenceClassification,
        AutoTokenizer,
    )

    _HAVE_TRANSFORMERS = True
except Exception:  # pragma: no cover
    _HAVE_TRANSFORMERS = False

WORD_PREFIX = "substituted word: "
ENTITY_PREFIX = "substituted entity: "


def _require_transformers() -> None:
    if not _HAVE_TRANSFORMERS:
        raise ModelError("transformers is not installed; install the 'hf' extra")


def _load(loader, checkpoint: str, device: str):
    try:
        model = loader.from_pretrained(checkpoint)
    except Exception as exc:  # noqa: BLE001 - any load failure is fatal at startup
        raise ModelError(f"cannot load {checkpoint!r}: {exc}") from exc
    model.eval()
    return model.to(device)


def _supported_index(model) -> int:
    """Index of the supported/entailment class, from the model's label map."""
    label2id = {k.lower(): v for k, v in getattr(model.config, "label2id", {}).items()}
    for name in ("supported", "entailment", "entail", "supports"):
        if name in label2id:
            return int(label2id[name])
    return 0


class HfVerifier:  # pragma: no cover - requires model weights
    def __init__(self, checkpoint: str, device: str = "cpu"):
        _require_transformers()
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = _load(AutoModelForSequenceClassification, checkpoint, device)
        self.supported_index = _supported_index(self.model)

    def _encode(self, claim_tokens: list[str], evidence_tokens: list[str]):
        return self.tokenizer(
            " ".join(claim_tokens),
            " ".join(evidence_tokens) if evidence_tokens else "",
            return_tensors="pt",
            truncation=True,
        ).to(self.device)

    def support_prob(self, claim_tokens: list[str], evidence_tokens: list[str]) -> float:
        with torch.no_grad():
            logits = self.model(**self._encode(claim_tokens, evidence_tokens)).logits[0]
        prob = torch.softmax(logits, dim=-1)[self.supported_index]
        return min(max(float(prob), 1e-6), 1 - 1e-6)

    def saliency(self, claim_tokens: list[str], evidence_tokens: list[str]) -> list[float]:
        """Per word: summed 2-norms of d(-log p_supported)/d(input embedding)
        over the word's subword pieces."""
        enc = self.tokenizer(
            claim_tokens,
            [" ".join(evidence_tokens)] if evidence_tokens else None,
            is_split_into_words=True,
            return_tensors="pt",
            truncation=True,
        ).to(self.device)
        embed_layer = self.model.get_input_embeddings()
        embeds = embed_layer(enc["input_ids"]).detach().requires_grad_(True)
        kwargs = {k: v for k, v in enc.items() if k != "input_ids"}
        logits = self.model(inputs_embeds=embeds, **kwargs).logits[0]
        prob = torch.softmax(logits, dim=-1)[self.supported_index].clamp(1e-6, 1 - 1e-6)
        (-torch.log(prob)).backward()
        norms = embeds.grad[0].norm(dim=-1)
        out = [0.0] * len(claim_tokens)
        for piece, word in enumerate(enc.word_ids(0)):
            if word is not None and word < len(claim_tokens):
                out[word] += float(norms[piece])
        return out


class HfMaskedLM:  # pragma: no cover - requires model weights
    def __init__(self, checkpoint: str, device: str = "cpu"):
        _require_transformers()
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = _load(AutoModelForMaskedLM, checkpoint, device)

    def pseudo_loglik(self, tokens: list[str]) -> float:
        enc = self.tokenizer(" ".join(tokens), return_tensors="pt", truncation=True).to(self.device)
        ids = enc["input_ids"][0]
        mask_id = self.tokenizer.mask_token_id
        total = 0.0
        with torch.no_grad():
            for pos in range(1, len(ids) - 1):  # skip special tokens
                masked = ids.clone()
                true_id = int(masked[pos])
                masked[pos] = mask_id
                logits = self.model(input_ids=masked.unsqueeze(0)).logits[0, pos]
                total += float(torch.log_softmax(logits, dim=-1)[true_id])
        return min(total, 0.0)


class HfProposer:  # pragma: no cover - requires model weights
    def __init__(self, checkpoint: str, device: str = "cpu", top_k: int = 50):
        _require_transformers()
        self.device = device
        self.top_k = top_k
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = _load(AutoModelForSeq2SeqLM, checkpoint, device)

    def _input(self, prefix: str, left: list[str], right: list[str], evidence: list[str]):
        text = prefix + " ".join(left + ["<extra_id_0>"] + right)
        if evidence:
            text += " context: " + " ".join(evidence)
        return self.tokenizer(text, return_tensors="pt", truncation=True).to(self.device)

    def token_dist(
        self, left: list[str], right: list[str], evidence: list[str], top_k: int | None = None
    ) -> tuple[list[str], list[float]]:
        enc = self._input(WORD_PREFIX, left, right, evidence)
        start = self.tokenizer("<extra_id_0>", return_tensors="pt").input_ids[:, :1].to(self.device)
        with torch.no_grad():
            logits = self.model(**enc, decoder_input_ids=start).logits[0, -1]
        probs = torch.softmax(logits, dim=-1)
        values, indices = probs.topk(min(top_k or self.top_k, probs.shape[-1]))
        tokens = [self.tokenizer.decode(i).strip() or "<unk>" for i in indices]
        kept = values / values.sum()
        return tokens, [float(v) for v in kept]

    def entity_scores(
        self, left: list[str], right: list[str], evidence: list[str], candidates: list[str]
    ) -> list[float]:
        enc = self._input(ENTITY_PREFIX, left, right, evidence)
        scores = []
        with torch.no_grad():
            for cand in candidates:
                labels = self.tokenizer(cand, return_tensors="pt").input_ids.to(self.device)
                out = self.model(**enc, labels=labels)
                n = max(int(labels.shape[-1]), 1)
                scores.append(-float(out.loss) if math.isfinite(float(out.loss)) else -1e9 / n)
        return scores
