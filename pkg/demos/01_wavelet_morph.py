# Wavelet morph walk-through on two synthetic faces.
# Run: python demos/01_wavelet_morph.py  (writes PNGs to demos/out/)
import os

import numpy as np

from wavemorph.geometry import augment_boundary, average_landmarks, delaunay
from wavemorph.image import save_image
from wavemorph.metrics import ssim
from wavemorph.morph import generate_morph
from wavemorph.synthetic import random_identity, render
from wavemorph.wavelet import grid_montage, packet_decompose

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)

rng = np.random.default_rng(42)
face_i, lm_i = render(random_identity(rng), 256, rng)
face_j, lm_j = render(random_identity(rng), 256, rng)

# The warp target is the average of the two landmark sets, plus 8 frame points
# so the mesh covers the whole image.
common = average_landmarks(lm_i, lm_j, 0.5)
mesh = delaunay(augment_boundary(common, 256, 256))
print("triangles in the warp mesh:", len(mesh))

# Three packet levels give an 8x8 grid of equal-size bands.
grid = packet_decompose(face_i.mean(axis=2), 3)
energy = (grid.bands ** 2).sum(axis=(2, 3))
print("share of energy in the baseband: %.4f" % (energy[0, 0] / energy.sum()))
save_image(grid_montage(grid), os.path.join(out, "packet_montage.png"))  # each band min-max scaled

res = generate_morph(face_i, face_j, lm_i, lm_j)
for name, img in (("face_i", face_i), ("face_j", face_j), ("morph_raw", res.raw_morph),
                  ("morph_onI", res.on_source), ("morph_onJ", res.on_destination)):
    save_image(img, os.path.join(out, name + ".png"))

# The splice leaves everything outside the hull untouched.
outside = res.mask == 0
print("pixels outside the hull changed:", int(np.count_nonzero(res.on_source[outside] != face_i[outside])))
print("SSIM(face_i, morph_onI) = %.4f" % ssim(face_i, res.on_source))
print("SSIM(face_j, morph_onJ) = %.4f" % ssim(face_j, res.on_destination))

# Self-morph: identical inputs come back unchanged inside the fused region.
same = generate_morph(face_i, face_i, lm_i, lm_i)
(top, left), (h, w) = same.crop_offset, same.crop_shape
print("self-morph max error: %.2e" % np.abs(same.raw_morph[top:top + h, left:left + w]
                                             - face_i[top:top + h, left:left + w]).max())
