"""Real model backends: e5-family sentence encoder and a causal LM decoder.

Imports are deferred so the service can run in stub mode without torch,
and so load failures surface as 503s instead of crashing the process.
"""

from __future__ import annotations

import numpy as np

DEFAULT_EMBED_MODEL = "intfloat/e5-small-v2"
MAX_INPUT_TOKENS = 1024


class E5Embedder:
    """Sentence encoder with query/passage prefixes and unit-norm outputs.

    normalize=False is an ablation switch; dot-product retrieval then runs
    on raw encoder outputs.
    """

    def __init__(self, model_name: str = DEFAULT_EMBED_MODEL, normalize: bool = True):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self.model = SentenceTransformer(model_name)
        self.dim = int(self.model.get_sentence_embedding_dimension())
        self.normalized = normalize

    def embed(self, texts: list[str], role: str) -> np.ndarray:
        prefixed = [f"{role}: {t}" for t in texts]
        vectors = self.model.encode(
            prefixed,
            normalize_embeddings=self.normalized,
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        return vectors.astype(np.float32)


class BeamSearchGenerator:
    """Deterministic beam-search continuation after the prompt.

    Prompts are truncated from the left to MAX_INPUT_TOKENS with the
    model's own tokenizer; only the continuation is returned.
    """

    def __init__(self, model_name: str, adapter_path: str | None = None):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.tokenizer.truncation_side = "left"
        self.model = AutoModelForCausalLM.from_pretrained(
            model_name,
            torch_dtype=torch.float16 if torch.cuda.is_available() else torch.float32,
            device_map="auto" if torch.cuda.is_available() else None,
        )
        if adapter_path:
            from peft import PeftModel

            self.model = PeftModel.from_pretrained(self.model, adapter_path)
        self.model.eval()
        self.decoding = {
            "strategy": "beam_search",
            "deterministic": True,
            "max_input_tokens": MAX_INPUT_TOKENS,
        }

    def generate(self, prompt: str, num_beams: int, max_new_tokens: int) -> list[tuple[str, float]]:
        import torch

        inputs = self.tokenizer(
            prompt, return_tensors="pt", truncation=True, max_length=MAX_INPUT_TOKENS
        ).to(self.model.device)
        with torch.no_grad():
            output = self.model.generate(
                **inputs,
                num_beams=num_beams,
                num_return_sequences=num_beams,
                max_new_tokens=max_new_tokens,
                do_sample=False,
                output_scores=True,
                return_dict_in_generate=True,
                pad_token_id=self.tokenizer.eos_token_id,
            )
        prompt_len = inputs["input_ids"].shape[1]
        candidates = []
        scores = output.sequences_scores.tolist() if output.sequences_scores is not None else []
        for i, sequence in enumerate(output.sequences):
            continuation = self.tokenizer.decode(
                sequence[prompt_len:], skip_special_tokens=True
            )
            score = float(scores[i]) if i < len(scores) else -float(i)
            candidates.append((continuation, score))
        candidates.sort(key=lambda c: -c[1])
        return candidates
