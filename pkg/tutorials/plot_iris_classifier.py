"""
Classifying Iris flowers
========================

Each flower's four measurements become the external excitation rates of
four input neurons.  After training, the predicted class is the output
neuron with the highest excitation probability.

Run ``rnn fetch-data`` first so the dataset is in the cache.
"""

import numpy as np

from rnnkit.data import EncodingConfig, load_dataset, normalize_and_encode, stratified_split
from rnnkit.harness import default_bench_config, evaluate
from rnnkit.learning import train

raw = load_dataset("iris")
print(raw.class_counts())

config = default_bench_config().datasets["iris"]
split = stratified_split(raw.labels, 0.2, seed=0)
ds = normalize_and_encode(raw, split, EncodingConfig(config.target_high, config.target_low))
print("input rates lie in [%.2f, %.2f]" % (ds.inputs.min(), ds.inputs.max()))

model = train(ds.inputs[split.train], ds.targets[split.train], config, ds.class_names,
              ds.normalization())
print("epoch-mean error: first %.4f, last %.4f" % (model.history[0], model.history[-1]))

result = evaluate(model, ds.inputs[split.test], ds.labels[split.test])
print("test accuracy: %.3f" % result.accuracy)
print(result.confusion.rates.round(2))

# the middle class is the hard one: with no external inhibition an input
# neuron's excitation rises with its rate, so "medium" needs the network
# to combine several ratios
print("recall per class:", np.diag(result.confusion.rates).round(2))
