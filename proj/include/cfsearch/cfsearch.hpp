#pragma once

#include "cfsearch/errors.hpp"
#include "cfsearch/grid.hpp"
#include "cfsearch/dcflow.hpp"
#include "cfsearch/simplex.hpp"
#include "cfsearch/dispatch.hpp"
#include "cfsearch/cascade.hpp"
#include "cfsearch/gcn.hpp"
#include "cfsearch/train.hpp"
#include "cfsearch/lrp.hpp"
#include "cfsearch/synthetic.hpp"
#include "cfsearch/search.hpp"
