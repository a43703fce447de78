"""Walk through the chunk pyramid: how one document becomes five
granularity levels of non-overlapping windows.

Run from the repository root:  python demos/01_chunk_pyramid.py
"""

from pathlib import Path

from granur.corpus import build_pyramid, containing_chunk, load_corpus, tokenize

DATA = Path(__file__).parent / "data" / "wildlife.jsonl"


def main():
    doc = load_corpus(str(DATA))[0]
    print(f"document {doc.doc_id!r}: {len(tokenize(doc.text))} tokens\n")

    pyramid = build_pyramid(doc, base_size=8, n_gra=5)
    print("level sizes (each level pairs adjacent chunks of the level below):")
    for level, chunks in enumerate(pyramid.levels, 1):
        widths = [c.end - c.start for c in chunks]
        print(f"  level {level}: {len(chunks):2d} chunks, covering widths {widths}")

    print("\nthe same finest chunk seen at every level:")
    target = 5
    for level in range(1, 6):
        chunk = containing_chunk(pyramid, target, level)
        text = chunk.text if len(chunk.text) < 70 else chunk.text[:67] + "..."
        print(f"  level {level} container of finest chunk {target}: "
              f"range {chunk.finest_range}  {text!r}")

    parent = pyramid.levels[1][0]
    left, right = pyramid.levels[0][0], pyramid.levels[0][1]
    print("\nreconstruction: a parent's text is the space-join of its children")
    print(f"  parent == left + ' ' + right: "
          f"{parent.text == left.text + ' ' + right.text}")


if __name__ == "__main__":
    main()
