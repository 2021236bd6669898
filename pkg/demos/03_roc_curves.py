# ROC of a detector before and after the attack, written as CSV + SVG.
import os

import numpy as np

from wavemorph import detector as det
from wavemorph.metrics import ScoreSet, auc, detector_scoreset, roc, roc_svg, write_roc_csv
from wavemorph.perturb import PerturbConfig, perturb
from wavemorph.synthetic import build_corpus

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)

corpus = build_corpus(n_bona_fide=300, n_morphs=300, size=64, seed=1)
model = det.train(corpus.bona_fide[:240], corpus.morphs[:240], seed=1)
bona, morphs = corpus.bona_fide[240:], corpus.morphs[240:]

clean = detector_scoreset(model, bona, morphs)
curve = roc(clean)
print("clean AUC (positive = morph): %.4f" % auc(curve))

for lam in (0.1, 0.0):
    adv = [perturb(m, model, PerturbConfig(lam=lam)).adversarial for m in morphs]
    scores = detector_scoreset(model, bona, adv)
    c = roc(scores)
    print("attacked AUC, lambda=%g: %.4f" % (lam, auc(c)))
    write_roc_csv(c, auc(c), os.path.join(out, "roc_lambda%g.csv" % lam))
    with open(os.path.join(out, "roc_lambda%g.svg" % lam), "w") as fh:
        fh.write(roc_svg(c, auc(c)))

# A hand-made set whose pairwise statistic is 3/4.
toy = ScoreSet(np.array([0.9, 0.4, 0.6, 0.1]), np.array([1, 1, 0, 0]))
print("toy AUC:", auc(roc(toy)))
