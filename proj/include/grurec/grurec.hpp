#pragma once

#include "grurec/errors.hpp"
#include "grurec/tensor.hpp"
#include "grurec/rng.hpp"
#include "grurec/finite_diff.hpp"
#include "grurec/nn/mode.hpp"
#include "grurec/nn/gru.hpp"
#include "grurec/nn/attention.hpp"
#include "grurec/nn/batchnorm.hpp"
#include "grurec/nn/dropout.hpp"
#include "grurec/nn/dense.hpp"
#include "grurec/nn/loss.hpp"
#include "grurec/data/sample.hpp"
#include "grurec/data/dataset_io.hpp"
#include "grurec/data/normalize.hpp"
#include "grurec/data/augment.hpp"
#include "grurec/data/protocol.hpp"
#include "grurec/data/synth.hpp"
#include "grurec/model/config.hpp"
#include "grurec/model/model.hpp"
#include "grurec/model/checkpoint.hpp"
#include "grurec/train/adam.hpp"
#include "grurec/train/metrics.hpp"
#include "grurec/train/trainer.hpp"
#include "grurec/train/user_dependent.hpp"
#include "grurec/gradcheck.hpp"
