# # Choosing inclusion probabilities from the topology
#
# The planner maps a network shape and a sample size to the rate quantities
# u, theta and r per layer, a contraction radius epsilon_n, and the prior
# inclusion probability lambda for each hidden layer.

from ssbnn.planner import RegimeSetting, TopologySpec, penalized_term, plan, regime_ratio

# ## The MNIST MLP

mlp = TopologySpec(n=60000, k=(784, 400, 400, 10), C=(1e-9,) * 3)
print(plan(mlp).to_csv())

# lambda lands within 1e-4 of 1/400: the tiny C keeps the exponential
# correction close to one.

lam0 = plan(mlp).hidden_lambdas()[0]
print("lambda_0 * 400 =", lam0 * 400)

# ## Group horseshoe
#
# With the default regularization the horseshoe penalty is fixed at 2, which
# moves theta up relative to the group lasso.

print(plan(TopologySpec(n=60000, k=(784, 400, 400, 10)), "ss-ghs").to_csv())

# ## The penalty term has its minimum where lambda_pen B^2 / (k + 1) = 1

B, k = 785.0, 784
for scale in (0.5, 1.0, 2.0):
    lam_pen = scale * (k + 1) / B**2
    print(f"lambda_pen B^2/(k+1) = {scale}: term = {penalized_term(lam_pen, B, k):.6f}")

# ## Growing n in the smooth-teacher regime
#
# No constant is claimed, so we only print epsilon_n / n^(-1/3).

for n in (10**4, 10**5, 10**6):
    print(f"n = {n:>8d}: ratio {regime_ratio(RegimeSetting(n)):.3f}")
