# # A desk-sized MNIST run under both group priors
#
# A 784-128-128-10 network is trained for 30 epochs on a subset of MNIST under
# the group-lasso and the group-horseshoe spike-and-slab priors. Point the
# script at a directory holding the four standard IDX files:
#
#     python demos/mnist_scaled.py data/mnist
#
# Without network access, demos/mnist_sample_to_idx.py builds such a
# directory from a 5000-digit sample.

import argparse
import time

from ssbnn import io as sio
from ssbnn.network import NetworkConfig
from ssbnn.planner import TopologySpec, plan
from ssbnn.priors import PriorSpec
from ssbnn.training import TrainConfig, build_model, train

ap = argparse.ArgumentParser()
ap.add_argument("mnist_dir")
ap.add_argument("--limit", type=int, default=10_000)
ap.add_argument("--epochs", type=int, default=30)
args = ap.parse_args()

# Pixels are divided by 126, which puts them in [0, 2.02].

train_ds = sio.load_mnist(args.mnist_dir, "train", limit=args.limit)
test_ds = sio.load_mnist(args.mnist_dir, "test")
print(f"{len(train_ds)} training images, {len(test_ds)} test images")

widths = (784, 128, 128, 10)
summary = {}
for kind in ("ss-gl", "ss-ghs"):
    lambdas = plan(TopologySpec(n=len(train_ds), k=widths), kind).hidden_lambdas()
    config = NetworkConfig(widths, prior=PriorSpec(kind, lambdas=lambdas))
    tcfg = TrainConfig(epochs=args.epochs, batch_size=1024, lr=1e-3, seed=0)
    t0 = time.perf_counter()
    result = train(build_model(config, 0), train_ds.inputs, train_ds.targets, tcfg,
                   x_eval=test_ds.inputs, y_eval=test_ds.targets)
    summary[kind] = (result.trace[-1], time.perf_counter() - t0)

# ## Results
#
# Node sparsity is the fraction of hidden nodes still switched on. The
# compression ratio counts surviving weights over the dense count.

for kind, (row, seconds) in summary.items():
    print(f"{kind:7s} accuracy {row['accuracy']:.4f}  sparsity {row['sparsity_l0']:.3f} / "
          f"{row['sparsity_l1']:.3f}  compression {row['compression']:.3f}  "
          f"flops {row['flops_ratio']:.3f}  ({seconds:.0f}s)")
