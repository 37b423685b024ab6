# # Recovering a noisy sine with a sparse Bayesian MLP
#
# We draw 2000 points from y = sin(2 pi x) + N(0, 1), fit a 1-64-1 network
# under the spike-and-slab group-lasso prior, and look at how many hidden
# nodes survive. Run with `--epochs 50` for a quick look.

import argparse

import numpy as np

from ssbnn import io as sio
from ssbnn.network import NetworkConfig, kl_to_truth_diagnostic
from ssbnn.planner import TopologySpec, plan
from ssbnn.priors import PriorSpec
from ssbnn.training import TrainConfig, build_model, train

ap = argparse.ArgumentParser()
ap.add_argument("--epochs", type=int, default=500)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

# ## Data
#
# The teacher and the noise come from the seeded generator, so the same seed
# always gives the same train and test sets.

teacher = sio.TeacherSpec("sin")
train_ds, test_ds = sio.gen_synthetic(teacher, 2000, noise_sigma=1.0, seed=args.seed)
print("train", train_ds.inputs.shape, "test", test_ds.inputs.shape)

# ## Prior inclusion probability
#
# The planner turns the topology into a per-layer inclusion probability.
# For a 64-node layer fed by one input it lands close to 1/64.

topology = TopologySpec(n=len(train_ds), k=(1, 64, 1))
lambdas = plan(topology).hidden_lambdas()
print("lambda for the hidden layer:", lambdas[0])

# ## Training

config = NetworkConfig((1, 64, 1), likelihood="gaussian", prior=PriorSpec("ss-gl", lambdas=lambdas))
model = build_model(config, args.seed)
tcfg = TrainConfig(epochs=args.epochs, batch_size=200, lr=0.01, seed=args.seed, eval_every=50)


def show(row):
    if row["epoch"] % 50 == 0 or row["epoch"] == 1:
        print(f"epoch {row['epoch']:4d}  elbo {row['elbo']:10.2f}  rmse {row['rmse']:.4f}  "
              f"active fraction {row['sparsity_l0']:.3f}")


result = train(model, train_ds.inputs, train_ds.targets, tcfg,
               x_eval=test_ds.inputs, y_eval=test_ds.targets, log=show)

# ## How close is the fit to the truth?
#
# The noise floor for RMSE is 1.0. The diagnostic averages half the squared
# gap between the teacher and the posterior-mean network over a grid.

grid = np.linspace(0, 1, 1001)[:, None]
diag = kl_to_truth_diagnostic(model, sio.make_teacher(teacher), grid)
final = result.trace[-1]
print(f"test RMSE {final['rmse']:.4f}")
print(f"KL to truth {diag.kl:.4f}, squared Hellinger {diag.hellinger_sq:.4f}")
print(f"{int(round(final['sparsity_l0'] * 64))} of 64 hidden nodes are still active")
