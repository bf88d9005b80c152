"""How far apart are the wavefront models at desk scale?

Draws one scene and measures each approximate LoS model against the exact
spherical one.
"""

import numpy as np

from xlmimo.channel import LOS_MODELS, los_channel, sample_scene
from xlmimo.geometry import ArrayConfig, SceneGeometry

array = ArrayConfig(64, 64, 4, 2)
geom = SceneGeometry(20.0, 0.3, -0.4, 0.2)
exact = los_channel(array, geom, "nuswm")

for model in LOS_MODELS[1:]:
    H = los_channel(array, geom, model)
    err = np.linalg.norm(H - exact) ** 2 / np.linalg.norm(exact) ** 2
    print(f"{model:10s} relative error at 20 m: {err:.3e}")

# A random scene adds scattered paths on top of the LoS part.
scene = sample_scene(array, np.random.default_rng(0))
los_power = np.linalg.norm(scene.los) ** 2
nlos_power = np.linalg.norm(scene.nlos) ** 2
print(f"random scene at {scene.truth_geom.range_m:.1f} m with {len(scene.truth_paths)} paths, "
      f"LoS-to-scattered power {10 * np.log10(los_power / nlos_power):.1f} dB")
