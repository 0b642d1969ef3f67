#pragma once

#include "isch/core.hpp"
#include "isch/dictionary.hpp"
#include "isch/encoder.hpp"
#include "isch/io.hpp"
#include "isch/oracle.hpp"
#include "isch/rotation.hpp"
#include "isch/search.hpp"
#include "isch/spectral.hpp"
