// Umbrella header: the full voxbag toolkit.
#ifndef VOXBAG_VOXBAG_HPP_
#define VOXBAG_VOXBAG_HPP_

#include "voxbag/bagging.hpp"
#include "voxbag/baselines.hpp"
#include "voxbag/bundle.hpp"
#include "voxbag/cnn/cost.hpp"
#include "voxbag/cnn/layers.hpp"
#include "voxbag/cnn/network.hpp"
#include "voxbag/cnn/train.hpp"
#include "voxbag/dataset.hpp"
#include "voxbag/error.hpp"
#include "voxbag/metrics.hpp"
#include "voxbag/nifti.hpp"
#include "voxbag/pipeline.hpp"
#include "voxbag/preprocess.hpp"
#include "voxbag/rng.hpp"
#include "voxbag/synth.hpp"
#include "voxbag/tensor.hpp"
#include "voxbag/tree.hpp"

#endif  // VOXBAG_VOXBAG_HPP_
