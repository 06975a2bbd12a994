"""Offline distant-supervision fine-tuning utilities (not used by the server).

Builds training pairs from supported claims: mask a random token or a
random multi-token span, and train the fill-in model to restore the
original content given the masked claim and its evidence. The span mode
uses the entity task prefix, the token mode the word prefix, matching what
the server sends at inference time.

Hyperparameters the underlying method leaves open (mask rate, span length
distribution) are plain flags with conservative defaults; nothing here is
claimed to reproduce any particular published configuration.

Usage:
    python -m scorerd.finetune proposer --data supported.jsonl --out ./ckpt \
        --base t5-base --epochs 5 --lr 3e-5 --mask-rate 0.15 --max-span 4
    python -m scorerd.finetune verifier --data labeled.jsonl --out ./ckpt \
        --base bert-base-uncased --epochs 5 --lr 1e-5
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from .hf import ENTITY_PREFIX, WORD_PREFIX, _require_transformers


def load_rows(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def build_proposer_pairs(rows: list[dict], mask_rate: float, max_span: int, seed: int):
    """(input text, target text) pairs from supported claims."""
    rng = random.Random(seed)
    pairs = []
    for row in rows:
        if row.get("label") not in (None, "SUPPORTED"):
            continue
        tokens = row["claim"].split()
        if len(tokens) < 2:
            continue
        n_masks = max(1, int(len(tokens) * mask_rate))
        for _ in range(n_masks):
            span = rng.randint(1, min(max_span, len(tokens) - 1))
            start = rng.randint(0, len(tokens) - span)
            target = " ".join(tokens[start : start + span])
            masked = tokens[:start] + ["<extra_id_0>"] + tokens[start + span :]
            prefix = WORD_PREFIX if span == 1 else ENTITY_PREFIX
            text = prefix + " ".join(masked)
            evidence = row.get("evidence") or []
            if evidence:
                text += " context: " + " ".join(evidence)
            pairs.append((text, target))
    return pairs


def finetune_proposer(args: argparse.Namespace) -> int:
    _require_transformers()
    import torch
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    pairs = build_proposer_pairs(load_rows(args.data), args.mask_rate, args.max_span, args.seed)
    if not pairs:
        print("no training pairs produced", file=sys.stderr)
        return 2
    tokenizer = AutoTokenizer.from_pretrained(args.base)
    model = AutoModelForSeq2SeqLM.from_pretrained(args.base).to(args.device)
    optim = torch.optim.AdamW(model.parameters(), lr=args.lr)
    model.train()
    rng = random.Random(args.seed)
    for epoch in range(args.epochs):
        rng.shuffle(pairs)
        for i in range(0, len(pairs), args.batch_size):
            batch = pairs[i : i + args.batch_size]
            enc = tokenizer(
                [src for src, _ in batch],
                return_tensors="pt", padding=True, truncation=True,
            ).to(args.device)
            labels = tokenizer(
                [tgt for _, tgt in batch],
                return_tensors="pt", padding=True, truncation=True,
            ).input_ids.to(args.device)
            labels[labels == tokenizer.pad_token_id] = -100
            loss = model(**enc, labels=labels).loss
            loss.backward()
            optim.step()
            optim.zero_grad()
        print(f"epoch {epoch + 1}/{args.epochs} done ({len(pairs)} pairs)")
    model.save_pretrained(args.out)
    tokenizer.save_pretrained(args.out)
    return 0


def finetune_verifier(args: argparse.Namespace) -> int:
    _require_transformers()
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    rows = [r for r in load_rows(args.data) if r.get("label") in ("SUPPORTED", "REFUTED")]
    if not rows:
        print("no labeled rows", file=sys.stderr)
        return 2
    tokenizer = AutoTokenizer.from_pretrained(args.base)
    model = AutoModelForSequenceClassification.from_pretrained(args.base, num_labels=2)
    model.config.label2id = {"REFUTED": 0, "SUPPORTED": 1}
    model.config.id2label = {0: "REFUTED", 1: "SUPPORTED"}
    model = model.to(args.device)
    optim = torch.optim.AdamW(model.parameters(), lr=args.lr)
    model.train()
    rng = random.Random(args.seed)
    for epoch in range(args.epochs):
        rng.shuffle(rows)
        for i in range(0, len(rows), args.batch_size):
            batch = rows[i : i + args.batch_size]
            enc = tokenizer(
                [r["claim"] for r in batch],
                [" ".join(r.get("evidence") or []) for r in batch],
                return_tensors="pt", padding=True, truncation=True,
            ).to(args.device)
            labels = torch.tensor(
                [1 if r["label"] == "SUPPORTED" else 0 for r in batch], device=args.device
            )
            loss = model(**enc, labels=labels).loss
            loss.backward()
            optim.step()
            optim.zero_grad()
        print(f"epoch {epoch + 1}/{args.epochs} done ({len(rows)} rows)")
    model.save_pretrained(args.out)
    tokenizer.save_pretrained(args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="scorerd.finetune", description=__doc__)
    sub = parser.add_subparsers(dest="task", required=True)
    for task in ("proposer", "verifier"):
        p = sub.add_parser(task)
        p.add_argument("--data", required=True, help="line-delimited JSON instances")
        p.add_argument("--out", required=True, help="checkpoint output directory")
        p.add_argument("--base", required=True, help="base checkpoint to fine-tune")
        p.add_argument("--epochs", type=int, default=5)
        p.add_argument("--lr", type=float, default=3e-5)
        p.add_argument("--batch-size", type=int, default=8)
        p.add_argument("--device", default="cpu")
        p.add_argument("--seed", type=int, default=0)
        if task == "proposer":
            p.add_argument("--mask-rate", type=float, default=0.15)
            p.add_argument("--max-span", type=int, default=4)
    args = parser.parse_args(argv)
    if args.task == "proposer":
        return finetune_proposer(args)
    return finetune_verifier(args)


if __name__ == "__main__":
    sys.exit(main())
