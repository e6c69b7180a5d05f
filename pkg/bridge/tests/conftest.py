import os

import pytest


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A miniature randomly-initialized cross-encoder saved to disk, so the
    transformers code path runs without any network access."""
    import torch
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    d = str(tmp_path_factory.mktemp("tiny-cross-encoder"))
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [
        "solar", "panel", "energy", "battery", "electric", "storage",
        "coral", "reef", "ocean", "water", "report", "study", "the", "a",
        "of", "grid", "bleaching", "temperature", "noise", "junk",
    ]
    with open(os.path.join(d, "vocab.txt"), "w") as fh:
        fh.write("\n".join(vocab) + "\n")
    tokenizer = BertTokenizer(os.path.join(d, "vocab.txt"))
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=16, num_hidden_layers=1,
        num_attention_heads=2, intermediate_size=32,
        max_position_embeddings=128, num_labels=1,
    )
    model = BertForSequenceClassification(config)
    tokenizer.save_pretrained(d)
    model.save_pretrained(d)
    return d
