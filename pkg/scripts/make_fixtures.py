"""Regenerate tests/fixtures from seed 13.

The golden score file is written by the package itself and then frozen; rerun
this only when the parameter or instance layout changes on purpose.
"""

import argparse
import json
from pathlib import Path

from mhgrn import ModelParams
from mhgrn.qa import QaInstance, option_scores
from mhgrn.numkit import Rng, write_csv_matrix, write_fmat
from mhgrn.relgraph import RelationVocab, extract_subgraph, load_kg

TOY_KG = "child\tAtLocation\tclassroom\nclassroom\tSynonym\tschoolroom\nchild\tCapableOf\tsit\n"
DIMS = dict(d_in=4, d=4, d_out=4, d_s=3, K=2, m=34, h_att=4, h_rho=6)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    (out / "toy_kg.tsv").write_text(TOY_KG, encoding="utf-8")
    kg = load_kg(out / "toy_kg.tsv", RelationVocab.default())
    params = ModelParams.init(**DIMS, seed=13)
    params.save(out / "params_seed13.json")

    rng = Rng(13)
    options = []
    for k, answer in enumerate(["schoolroom", "sit"]):
        graph = extract_subgraph(kg, {kg.link("child")}, {kg.link(answer)})
        graph.save(out / f"option{k}_graph.json")
        write_csv_matrix(out / f"option{k}_s.csv", rng.uniform_array((1, DIMS["d_s"]), -1, 1))
        write_fmat(out / f"option{k}_features.fmat", rng.uniform_array((graph.n, DIMS["d_in"]), -1, 1))
        options.append({"s_csv": f"option{k}_s.csv", "graph_json": f"option{k}_graph.json",
                        "features": f"option{k}_features.fmat"})
    (out / "instance.json").write_text(json.dumps({"options": options, "correct": 0}, indent=1), encoding="utf-8")

    scores = option_scores(QaInstance.load(out / "instance.json"), params)
    golden = {"scores": scores.tolist(), "prediction": int(scores.argmax())}
    (out / "golden_score.json").write_text(json.dumps(golden, indent=1), encoding="utf-8")
    print(json.dumps(golden))


if __name__ == "__main__":
    main()
