#pragma once

#include "bleu.hpp"
#include "bpe.hpp"
#include "checkpoint.hpp"
#include "data.hpp"
#include "decode.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "train.hpp"
#include "transmission.hpp"

namespace metamt {

// Default scalar type. Training and inference run in 32-bit floats; the
// double instantiation exists for gradient verification (METAMT_FP64=1 on the
// command line).
using Real = float;

}  // namespace metamt
