"""Bridge between the Rust pretrained encoder backend and sentence-transformers.

Reads one JSON request on stdin, writes one JSON response on stdout.
Commands: info, embed, fine_tune.
"""
import json
import sys


def load(req):
    from sentence_transformers import SentenceTransformer

    return SentenceTransformer(
        req["model"],
        cache_folder=req.get("cache_dir"),
        device=req.get("device") or "cpu",
    )


def count_truncated(model, texts):
    limit = model.max_seq_length
    if not limit:
        return 0
    lengths = [len(ids) for ids in model.tokenizer(texts, truncation=False)["input_ids"]]
    return sum(1 for n in lengths if n > limit)


def info(req):
    model = load(req)
    return {
        "dimension": model.get_sentence_embedding_dimension(),
        "max_seq_length": model.max_seq_length,
    }


def embed(req):
    model = load(req)
    texts = req["texts"]
    if not texts:
        return {"embeddings": [], "truncated": 0}
    vectors = model.encode(
        texts,
        batch_size=req.get("batch_size", 32),
        normalize_embeddings=True,
        convert_to_numpy=True,
        show_progress_bar=False,
    )
    return {
        "embeddings": vectors.astype("float64").tolist(),
        "truncated": count_truncated(model, texts),
    }


def fine_tune(req):
    import torch
    import torch.nn.functional as F

    torch.manual_seed(req["seed"])
    model = load(req)
    model.train()
    device = model.device
    optimizer = torch.optim.AdamW(model.parameters(), lr=req["learning_rate"])
    pairs = req["pairs"]

    def encode(texts):
        features = model.tokenize(texts)
        features = {k: v.to(device) for k, v in features.items()}
        return model(features)["sentence_embedding"]

    epoch_losses = []
    for epoch in req["schedule"]:
        total = 0.0
        for batch in epoch:
            a = encode([pairs[i][0] for i in batch])
            b = encode([pairs[i][1] for i in batch])
            target = torch.tensor([pairs[i][2] for i in batch], dtype=a.dtype, device=device)
            loss = F.mse_loss(F.cosine_similarity(a, b), target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
        epoch_losses.append(total / len(pairs))
    model.save(req["out_dir"])
    return {"epoch_losses": epoch_losses}


def main():
    command = sys.argv[1]
    req = json.load(sys.stdin)
    handler = {"info": info, "embed": embed, "fine_tune": fine_tune}[command]
    json.dump(handler(req), sys.stdout)


if __name__ == "__main__":
    main()
