#pragma once

#include "dalr/activation_stats.hpp"
#include "dalr/compression.hpp"
#include "dalr/error.hpp"
#include "dalr/io.hpp"
#include "dalr/layer.hpp"
#include "dalr/matrix.hpp"
#include "dalr/network.hpp"
#include "dalr/report.hpp"
#include "dalr/search.hpp"
#include "dalr/solve.hpp"
#include "dalr/svd.hpp"
