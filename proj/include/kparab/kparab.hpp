#pragma once

#include "kparab/error.hpp"
#include "kparab/expr.hpp"
#include "kparab/quadrature.hpp"
#include "kparab/ode.hpp"
#include "kparab/profile.hpp"
#include "kparab/divergence.hpp"
#include "kparab/geom.hpp"
#include "kparab/classify.hpp"
#include "kparab/models.hpp"
#include "kparab/verify.hpp"
#include "kparab/io.hpp"
