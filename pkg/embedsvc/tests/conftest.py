import os

import pytest
import torch
from tokenizers.implementations import ByteLevelBPETokenizer
from transformers import PreTrainedTokenizerFast, RobertaConfig, RobertaModel

TRAIN_TEXTS = [
    "the lion hunts at night across the open savanna",
    "polar bears hunt seals through holes in the sea ice",
    "salmon fight their way back upstream to spawn",
    "coral reefs are built by colonies of tiny polyps",
    "beavers fell aspen and willow to build their dams",
    "kangaroo rats never drink water in the desert",
    "snowy owls nest on the tundra and hunt lemmings",
    "what do parrotfish produce by grinding coral",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A frozen RoBERTa-class encoder small enough to build in-process:
    byte-level BPE tokenizer trained on a few sentences plus a seeded
    randomly initialized 2-layer model (dim 32). No downloads involved.
    """
    path = tmp_path_factory.mktemp("tiny-encoder")
    bpe = ByteLevelBPETokenizer()
    bpe.train_from_iterator(
        TRAIN_TEXTS,
        vocab_size=600,
        min_frequency=1,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"],
    )
    bpe.save(str(path / "tokenizer.json"))
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_file=str(path / "tokenizer.json"),
        bos_token="<s>",
        eos_token="</s>",
        pad_token="<pad>",
        unk_token="<unk>",
        mask_token="<mask>",
    )
    config = RobertaConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=130,
        pad_token_id=tokenizer.pad_token_id,
    )
    torch.manual_seed(0)
    model = RobertaModel(config)
    model.save_pretrained(str(path))
    tokenizer.save_pretrained(str(path))
    return str(path)


@pytest.fixture()
def tiny_model_env(tiny_model_dir, monkeypatch):
    monkeypatch.setenv("EMBEDSVC_MODEL", tiny_model_dir)
    return tiny_model_dir
