"""Reference fine-tuning recipe for the generation backend.

Records the exact hyperparameters the served checkpoints are trained
with and converts a corpus artifact into serialized training texts. The
optional --execute path runs QLoRA supervised fine-tuning when the model
stack (torch, transformers, peft, trl, bitsandbytes) and weights are
available; everything else works offline.

Usage:
    python -m seqrec_sidecar.finetune_recipe --corpus beauty.corpus --out texts.jsonl
    python -m seqrec_sidecar.finetune_recipe --corpus beauty.corpus --out texts.jsonl \
        --execute --model meta-llama/Llama-3.2-1B --output-dir checkpoints/
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

CORPUS_MAGIC = "SEQREC1"

RECIPE = {
    "quantization_bits": 4,
    "lora_rank": 16,
    "lora_alpha": 16,
    "epochs": 10,
    "per_device_batch_size": 4,
    "gradient_accumulation_steps": 4,  # effective batch 16
    "optimizer": "adamw",
    "learning_rate": 1e-4,
    "lr_schedule": "linear",
    "warmup_steps": 300,
    "weight_decay": 0.01,
    "early_stopping_metric": "validation_loss",
    "early_stopping_patience": 3,
    "max_sequence_tokens": 1024,
    "truncation_side": "left",
    "inference_num_beams": 5,
    "inference_max_new_tokens": 50,
}

# Serialization template, kept in sync with the engine's defaults.
HEADER = (
    "Below is a customer's purchase history on Amazon, listed in chronological order "
    "(earliest to latest). Each item is represented by the following format: "
    "Title: <item title>. Based on this history, predict only one item the customer "
    "is most likely to purchase next in the same format."
)
HISTORY_LABEL = "Purchase history:"
NEXT_LABEL = "Next item:"


def read_corpus(path: str | Path) -> tuple[dict[str, str], list[list[str]]]:
    """Minimal reader for the engine's corpus artifact (item titles + sequences)."""
    titles: dict[str, str] = {}
    sequences: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as f:
        if f.readline().strip() != CORPUS_MAGIC:
            raise ValueError(f"{path}: not a corpus artifact")
        f.readline()  # meta line
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("kind") == "item":
                titles[rec["id"]] = rec["title"]
            elif rec.get("kind") == "user":
                sequences.append(list(rec["items"]))
    return titles, sequences


def training_text(history_titles: list[str], target_title: str) -> str:
    lines = [HEADER, "", HISTORY_LABEL]
    lines += [f"Title: {t}" for t in history_titles]
    lines += [NEXT_LABEL, f"Title: {target_title}"]
    return "\n".join(lines) + "\n"


def build_training_texts(corpus_path: str | Path) -> list[str]:
    """One text per user from the first n-1 items (last of those is the target)."""
    titles, sequences = read_corpus(corpus_path)
    texts = []
    for items in sequences:
        head = items[:-1]
        if len(head) < 2:
            continue
        texts.append(training_text([titles[i] for i in head[:-1]], titles[head[-1]]))
    return texts


def execute_finetuning(texts_path: Path, model_name: str, output_dir: str) -> None:
    """QLoRA supervised fine-tuning with the recorded hyperparameters."""
    import torch
    from datasets import load_dataset
    from peft import LoraConfig
    from transformers import (
        AutoModelForCausalLM,
        AutoTokenizer,
        BitsAndBytesConfig,
        EarlyStoppingCallback,
        TrainingArguments,
    )
    from trl import SFTTrainer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    tokenizer.truncation_side = RECIPE["truncation_side"]
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token

    model = AutoModelForCausalLM.from_pretrained(
        model_name,
        quantization_config=BitsAndBytesConfig(
            load_in_4bit=True, bnb_4bit_compute_dtype=torch.float16
        ),
        device_map="auto",
    )
    dataset = load_dataset("json", data_files=str(texts_path), split="train")
    dataset = dataset.train_test_split(test_size=0.05, seed=0)

    trainer = SFTTrainer(
        model=model,
        tokenizer=tokenizer,
        train_dataset=dataset["train"],
        eval_dataset=dataset["test"],
        dataset_text_field="text",
        max_seq_length=RECIPE["max_sequence_tokens"],
        peft_config=LoraConfig(
            r=RECIPE["lora_rank"], lora_alpha=RECIPE["lora_alpha"], task_type="CAUSAL_LM"
        ),
        args=TrainingArguments(
            output_dir=output_dir,
            num_train_epochs=RECIPE["epochs"],
            per_device_train_batch_size=RECIPE["per_device_batch_size"],
            gradient_accumulation_steps=RECIPE["gradient_accumulation_steps"],
            learning_rate=RECIPE["learning_rate"],
            lr_scheduler_type=RECIPE["lr_schedule"],
            warmup_steps=RECIPE["warmup_steps"],
            weight_decay=RECIPE["weight_decay"],
            eval_strategy="epoch",
            save_strategy="epoch",
            load_best_model_at_end=True,
            metric_for_best_model="eval_loss",
        ),
        callbacks=[EarlyStoppingCallback(RECIPE["early_stopping_patience"])],
    )
    trainer.train()
    trainer.save_model(output_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Serialize training texts; optionally fine-tune")
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--out", required=True, help="output JSONL of {'text': ...} records")
    parser.add_argument("--execute", action="store_true")
    parser.add_argument("--model", default="meta-llama/Llama-3.2-1B")
    parser.add_argument("--output-dir", default="checkpoints")
    args = parser.parse_args(argv)

    texts = build_training_texts(args.corpus)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as f:
        for text in texts:
            f.write(json.dumps({"text": text}, ensure_ascii=False) + "\n")
    print(f"wrote {len(texts)} training texts to {out}")
    print(f"recipe: {json.dumps(RECIPE, sort_keys=True)}")

    if args.execute:
        execute_finetuning(out, args.model, args.output_dir)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
