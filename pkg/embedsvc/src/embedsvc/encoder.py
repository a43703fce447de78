"""Frozen transformer encoder: mean-pooled final-layer token embeddings,
L2-normalized, computed one text at a time so a batched request returns
exactly the same vectors as single requests.
"""

from __future__ import annotations

import torch
from transformers import AutoModel, AutoTokenizer


class Encoder:
    def __init__(self, model_name: str, max_tokens: int = 512):
        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.eval()
        self.dim = int(self.model.config.hidden_size)
        positions = int(getattr(self.model.config, "max_position_embeddings", max_tokens))
        # RoBERTa-style models reserve two position slots for padding offset
        self.max_tokens = max(8, min(max_tokens, positions - 2))

    @torch.no_grad()
    def embed(self, texts: list[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            enc = self.tokenizer(
                text,
                return_tensors="pt",
                truncation=True,
                max_length=self.max_tokens,
            )
            hidden = self.model(**enc).last_hidden_state  # (1, seq, dim)
            pooled = hidden.mean(dim=1)[0]
            norm = pooled.norm()
            if norm > 0:
                pooled = pooled / norm
            vectors.append([float(v) for v in pooled])
        return vectors
