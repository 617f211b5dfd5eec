"""
Building train, validation and test sets
========================================

A synchronous split shuffles everything and keeps label ratios. An
asynchronous split trains on the past and tests on documents published on or
after a cutoff date.
"""

import datetime as dt

from litriage import datasets as ds, synthetic

docs = synthetic.separable_documents(120, seed=0)

sync = ds.synchronous_split(docs, (0.8, 0.1, 0.1), seed=0)
for name in ds.SPLITS:
    part = sync.select(docs, name)
    print(f"sync  {name:<10} {len(part):>3} docs, {sum(d.is_positive for d in part):>3} positive")

cutoff = dt.date(2018, 1, 1)
asyn = ds.asynchronous_split(docs, cutoff, 0.1, seed=0)
for name in ds.SPLITS:
    part = asyn.select(docs, name)
    dates = sorted(d.date for d in part)
    span = f"{dates[0]} .. {dates[-1]}" if dates else "empty"
    print(f"async {name:<10} {len(part):>3} docs, {span}")

# the most frequent content words of positives
positives = [d for d in docs if d.is_positive]
print("keywords:", ds.keyword_top_k(positives, k=6))

# negatives: random draws, and ambiguous ones that mention genes and diseases
pool = synthetic.separable_documents(200, seed=1)
rand = ds.negative_sample_random(pool, 10, positives, seed=0)
spec = ds.NegativeSampleSpec("ambiguous", pool, 10, synthetic.GENES, synthetic.DISEASES, seed=0)
amb = ds.negative_sample_ambiguous(spec, positives)
print(f"{len(rand)} random and {len(amb)} ambiguous negatives; none share a pmid with a positive:",
      not ({d.pmid for d in rand + amb} & {d.pmid for d in positives}))
