# # Counting FLOPs for LeNet-5 and a pruned variant
#
# Layer shapes are read from a small text file, one layer per line. Pruning
# output channels in one layer also shrinks the inputs of the next one.

from dataclasses import replace
from pathlib import Path

from ssbnn.metrics import flops_ratio, flops_table, parse_architecture

arch = Path(__file__).resolve().parents[1] / "configs" / "lenet5_caffe.arch"
shapes = parse_architecture(arch.read_text())
for shape, (dense, pruned) in zip(shapes, flops_table(shapes)):
    print(f"{shape.kind:7s} dense {dense:>9,d}  pruned {pruned:>9,d}")
print("total", sum(d for d, _ in flops_table(shapes)))

# ## Keep half of the second convolution's channels
#
# The second convolution halves, and the first linear layer sees 25 x 4 x 4
# = 400 live inputs in place of 800.

pruned = list(shapes)
pruned[1] = replace(shapes[1], C_out_pr=25)
for (d0, _), (_, p1) in zip(flops_table(shapes), flops_table(pruned)):
    print(f"dense {d0:>9,d}  pruned {p1:>9,d}")
print(f"FLOPs ratio {flops_ratio(pruned):.4f}")
