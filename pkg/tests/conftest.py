import numpy as np

# Depth-3 sequence found by the long multi-start search (40 starts x 3000
# evaluations, seed 12345): beats the CF baseline by 1.0e-4 for bin(2,4)
# under thermal(0.05, 0.5), cutoff-stable at N = 40/60/80.
IMPROVED_DEPTH3_X = np.array([
    0.655890047614864, -0.004463104133983764, 1.781298072134623,
    -0.6554485933932216, 0.004237700100577605, 0.002646844335741885,
    -0.29867109587131374, 0.7650260710342746, -0.2104101131339516,
    -0.19071568247277196, 0.11715015519222866, -0.0004357159075593576,
    0.2264594028333592, -1.020699043764131, 0.00047157414208579473,
    0.25679491151144346, 0.15787952454155654, -1.5708479049046675,
])
