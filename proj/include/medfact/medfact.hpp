#pragma once

#include "medfact/checkpoint.hpp"
#include "medfact/correlation.hpp"
#include "medfact/data/cohort.hpp"
#include "medfact/data/preprocess.hpp"
#include "medfact/data/psv.hpp"
#include "medfact/data/split.hpp"
#include "medfact/data/synthetic.hpp"
#include "medfact/embedding.hpp"
#include "medfact/errors.hpp"
#include "medfact/evaluation.hpp"
#include "medfact/interaction.hpp"
#include "medfact/model.hpp"
#include "medfact/numerics/autodiff.hpp"
#include "medfact/numerics/eigen.hpp"
#include "medfact/numerics/matrix.hpp"
#include "medfact/numerics/rng.hpp"
#include "medfact/partition.hpp"
#include "medfact/prediction.hpp"
#include "medfact/training.hpp"
