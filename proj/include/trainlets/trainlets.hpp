#pragma once

#include "trainlets/base_operator.hpp"
#include "trainlets/config.hpp"
#include "trainlets/dict_file.hpp"
#include "trainlets/error.hpp"
#include "trainlets/experiments.hpp"
#include "trainlets/image_io.hpp"
#include "trainlets/learning.hpp"
#include "trainlets/pursuit.hpp"
#include "trainlets/sparse_dictionary.hpp"
#include "trainlets/sparse_vec.hpp"
#include "trainlets/types.hpp"
#include "trainlets/wavelet_filters.hpp"
#include "trainlets/wavelets.hpp"
