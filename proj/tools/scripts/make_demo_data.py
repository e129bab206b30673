#!/usr/bin/env python3
"""Writes a small planted-structure dataset for trying the kgrec CLI.

Users belong to one of two taste clusters and rate a run of contents from
their cluster. Each content links to a genre entity and a sub-genre entity.
"""
import argparse
import pathlib
import random

GENRES = ["Drama", "Comedy"]
SUBGENRES = ["Noir", "Heist", "Courtroom", "Biopic", "Satire", "Parody", "Romcom", "Farce"]


def main():
    p = argparse.ArgumentParser()
    p.add_argument("out", type=pathlib.Path)
    p.add_argument("--users", type=int, default=120)
    p.add_argument("--contents", type=int, default=80)
    p.add_argument("--per-user", type=int, default=15)
    p.add_argument("--seed", type=int, default=1)
    a = p.parse_args()
    rng = random.Random(a.seed)
    a.out.mkdir(parents=True, exist_ok=True)

    half = a.contents // 2
    seg = half // 4
    genre_entity = {g: 100000 + i for i, g in enumerate(GENRES)}
    sub_entity = {s: 200000 + i for i, s in enumerate(SUBGENRES)}

    with open(a.out / "kg.tsv", "w") as kg, open(a.out / "metadata.csv", "w") as meta:
        meta.write("content_id,title,year,genres,synopsis\n")
        for c in range(a.contents):
            cluster, sub = c // half, min((c % half) // seg, 3)
            g, s = GENRES[cluster], SUBGENRES[cluster * 4 + sub]
            cid = 1000 + c
            kg.write(f"{cid}\t1\t{genre_entity[g]}\n{cid}\t2\t{sub_entity[s]}\n")
            meta.write(f'{cid},Picture {c},{1970 + c % 50},{g}|{s},"A {s.lower()} story."\n')

    with open(a.out / "ratings.tsv", "w") as r:
        for u in range(a.users):
            cluster = u % 2
            start = rng.randrange(half)
            liked = [cluster * half + (start + o) % half for o in range(a.per_user)]
            for c in liked:
                r.write(f"{u + 1}\t{1000 + c}\t{rng.choice([4, 5])}\n")
            for c in rng.sample([c for c in range(a.contents) if c not in liked], 2):
                r.write(f"{u + 1}\t{1000 + c}\t1\n")


if __name__ == "__main__":
    main()
