#pragma once

#include "ddtd/error.hpp"
#include "ddtd/grid.hpp"
#include "ddtd/field.hpp"
#include "ddtd/normalize.hpp"
#include "ddtd/svg.hpp"
#include "ddtd/circuit.hpp"
#include "ddtd/vae.hpp"
#include "ddtd/moo.hpp"
#include "ddtd/config.hpp"
#include "ddtd/layout_io.hpp"
#include "ddtd/parallel.hpp"
#include "ddtd/format.hpp"
#include "ddtd/engine.hpp"
