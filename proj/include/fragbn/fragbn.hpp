#pragma once

#include "fragbn/bayes_net.hpp"
#include "fragbn/combine.hpp"
#include "fragbn/dsl.hpp"
#include "fragbn/error.hpp"
#include "fragbn/hypothesis.hpp"
#include "fragbn/infer.hpp"
#include "fragbn/influence.hpp"
#include "fragbn/kb.hpp"
#include "fragbn/workspace.hpp"
