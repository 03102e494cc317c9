# Discovering handwriting styles in zeros and ones.
#
# Each exemplar is offered to the model.  A new latent state (a "style") is
# only added when it explains the image better than every existing style and
# makes the pixels more informative about the latent state.  Styles are
# tied to the label of the exemplar that created them.

import tempfile

import numpy as np

from activegrowth import agent
from activegrowth.geometry import embed
from activegrowth.mnist import MnistConfig, load_mnist, write_bundled_sample
from activegrowth.model import new_minimal
from activegrowth.structure import IngestConfig, ingest_stream, prune

images, labels = write_bundled_sample(tempfile.mkdtemp())
data = load_mnist(MnistConfig(images, labels, n_train=64, n_test=50, n_pixels=128))

model = new_minimal([(f"px{int(i)}", 2) for i in data.pixels], 1 / 16, alpha=8.0)
cfg = IngestConfig(alpha=8.0, kinds=("parent", "add_state"), labels=list(data.train_labels), hyperprior_N=128)
res = ingest_stream(model, [[o] for o in data.observations("train")], cfg)
print("styles found:", res.model.n_states[0], "labels:", [int(x) for x in res.state_labels])

# Classify held-out digits and keep the evidence of each.
F, correct = [], []
for obs, y in zip(data.observations("test"), data.test_labels):
    post, f = agent.classify(res.model, obs, res.state_labels, (0, 1))
    F.append(f)
    correct.append(int(np.argmax(post)) == y)
print(f"held-out accuracy: {np.mean(correct):.3f}")

# The most confidently explained digits are classified best.
order = np.argsort(F)
print(f"accuracy on the best-explained half: {np.mean(np.array(correct)[order[: len(F) // 2]]):.3f}")

# Model reduction removes pixel counts that were never used.
reduced, rep = prune(res.model)
print(f"pruned {rep.removed} parameters, evidence gain {rep.dF:.2f} nats")

if res.model.n_states[0] > 1:
    emb = embed(res.model)
    print("similarity between styles:\n", np.round(emb.similarity, 2))
