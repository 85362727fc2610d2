#pragma once

#include "segfuse/class_weights.hpp"
#include "segfuse/core.hpp"
#include "segfuse/digest.hpp"
#include "segfuse/fixtures.hpp"
#include "segfuse/fusion.hpp"
#include "segfuse/image_ops.hpp"
#include "segfuse/io/class_table.hpp"
#include "segfuse/io/file.hpp"
#include "segfuse/io/logits.hpp"
#include "segfuse/io/manifest.hpp"
#include "segfuse/io/png.hpp"
#include "segfuse/io/weights_file.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/palette.hpp"
#include "segfuse/parallel.hpp"
#include "segfuse/pipeline.hpp"
#include "segfuse/rng.hpp"
#include "segfuse/synthesis.hpp"
