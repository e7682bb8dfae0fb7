#!/usr/bin/env python3
"""Generate frozen test fixtures for the text metrics.

Reference implementations of corpus BLEU-4, ROUGE-L and CIDEr live here,
independent of the C++ library. Run once; the resulting JSON is committed
under tests/fixtures/ and the C++ metric suite is checked against it.

Conventions pinned by this script (and mirrored by the library):
  * BLEU: modified n-gram precision n=1..4, corpus-level, no smoothing,
    brevity penalty with closest reference length (ties -> shorter).
  * ROUGE-L: per-item max over references of the LCS F-measure with
    beta = 1.2; corpus score is the mean over items. Scaled to [0, 100].
  * CIDEr: tf-idf weighted n-gram cosine (n=1..4) with df from the
    reference corpus, Gaussian length penalty (sigma = 6), clipped
    hypothesis counts, x10 scaling, mean over references then items.
"""

import json
import math
import os
import random

BETA = 1.2
SIGMA = 6.0


def ngrams(tokens, n):
    counts = {}
    for i in range(len(tokens) - n + 1):
        key = tuple(tokens[i:i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


def corpus_bleu(items):
    num = [0] * 4
    den = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, refs in items:
        hyp_len += len(hyp)
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, 5):
            hyp_counts = ngrams(hyp, n)
            max_ref = {}
            for r in refs:
                for gram, c in ngrams(r, n).items():
                    max_ref[gram] = max(max_ref.get(gram, 0), c)
            num[n - 1] += sum(min(c, max_ref.get(g, 0)) for g, c in hyp_counts.items())
            den[n - 1] += max(0, len(hyp) - n + 1)
    if hyp_len == 0:
        return 0.0
    precisions = [num[i] / den[i] if den[i] > 0 else 0.0 for i in range(4)]
    if min(precisions) <= 0.0:
        return 0.0
    log_avg = sum(math.log(p) for p in precisions) / 4.0
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_avg)


def lcs_len(a, b):
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(cur[j], prev[j + 1]))
        prev = cur
    return prev[len(b)]


def rouge_l(items):
    total = 0.0
    for hyp, refs in items:
        best = 0.0
        for r in refs:
            lcs = lcs_len(hyp, r)
            if lcs == 0 or not hyp or not r:
                continue
            p = lcs / len(hyp)
            q = lcs / len(r)
            f = (1 + BETA * BETA) * p * q / (q + BETA * BETA * p)
            best = max(best, f)
        total += best
    return 100.0 * total / len(items)


def cider(items):
    # Document frequency over reference sets, one document per item.
    df = {}
    for _, refs in items:
        seen = set()
        for r in refs:
            for n in range(1, 5):
                seen.update(ngrams(r, n).keys())
        for g in seen:
            df[g] = df.get(g, 0) + 1
    corpus_norm = math.log(len(items))

    def to_vec(tokens):
        vec = [dict() for _ in range(4)]
        norm = [0.0] * 4
        length = 0
        for n in range(1, 5):
            for g, tf in ngrams(tokens, n).items():
                w = tf * (corpus_norm - math.log(max(1.0, df.get(g, 0))))
                vec[n - 1][g] = w
                norm[n - 1] += w * w
                if n == 2:
                    length += tf
        return vec, [math.sqrt(x) for x in norm], length

    scores = []
    for hyp, refs in items:
        hv, hn, hl = to_vec(hyp)
        acc = [0.0] * 4
        for r in refs:
            rv, rn, rl = to_vec(r)
            delta = float(hl - rl)
            for n in range(4):
                val = 0.0
                for g, w in hv[n].items():
                    val += min(w, rv[n].get(g, 0.0)) * rv[n].get(g, 0.0)
                if hn[n] != 0.0 and rn[n] != 0.0:
                    val /= hn[n] * rn[n]
                acc[n] += val * math.exp(-(delta * delta) / (2 * SIGMA * SIGMA))
        scores.append(sum(acc) / 4.0 / len(refs) * 10.0)
    return sum(scores) / len(scores)


VOCAB = ("the a on near by old new red blue stone river city tower bridge "
         "museum garden opened closed built famous quiet large small is was "
         "stands lies hosts holds . ,").split()


def random_sentence(rng, lo=1, hi=18):
    return [rng.choice(VOCAB) for _ in range(rng.randint(lo, hi))]


def mutate(rng, tokens):
    out = list(tokens)
    for _ in range(rng.randint(0, max(1, len(out) // 3))):
        op = rng.randint(0, 2)
        pos = rng.randrange(len(out)) if out else 0
        if op == 0 and out:
            out[pos] = rng.choice(VOCAB)
        elif op == 1:
            out.insert(pos, rng.choice(VOCAB))
        elif op == 2 and len(out) > 1:
            del out[pos]
    return out


def build_cases():
    rng = random.Random(20240917)
    cases = []

    # Identity corpus: hypotheses equal their single reference.
    items = [(s, [list(s)]) for s in (random_sentence(rng, 4, 12) for _ in range(4))]
    cases.append(items)

    # Fully disjoint vocabulary.
    items = [(["zzz"] * 5, [random_sentence(rng, 4, 8)]) for _ in range(3)]
    cases.append(items)

    # One empty hypothesis in the corpus.
    items = [(random_sentence(rng, 3, 9), [random_sentence(rng, 3, 9)]) for _ in range(3)]
    items.append(([], [random_sentence(rng, 3, 6)]))
    cases.append(items)

    # Very short hypotheses (4-gram denominator empty).
    items = [(random_sentence(rng, 1, 3), [random_sentence(rng, 2, 6)]) for _ in range(4)]
    cases.append(items)

    for _ in range(16):
        n_items = rng.randint(2, 8)
        items = []
        for _ in range(n_items):
            ref0 = random_sentence(rng, 3, 20)
            refs = [ref0] + [mutate(rng, ref0) for _ in range(rng.randint(0, 2))]
            refs = [r if r else ["the"] for r in refs]
            hyp = mutate(rng, rng.choice(refs))
            items.append((hyp, refs))
        cases.append(items)
    return cases


def main():
    out = {"beta": BETA, "sigma": SIGMA, "version": 1, "cases": []}
    for items in build_cases():
        out["cases"].append({
            "items": [{"hyp": h, "refs": r} for h, r in items],
            "bleu": corpus_bleu(items),
            "rouge_l": rouge_l(items),
            "cider": cider(items),
        })
    path = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures",
                        "metrics_cases.json")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")
    print(f"wrote {len(out['cases'])} cases to {path}")


if __name__ == "__main__":
    main()
