#pragma once

#include "scgnn/augment.hpp"
#include "scgnn/bench.hpp"
#include "scgnn/error.hpp"
#include "scgnn/gbc.hpp"
#include "scgnn/graph.hpp"
#include "scgnn/io.hpp"
#include "scgnn/lcc.hpp"
#include "scgnn/matrix.hpp"
#include "scgnn/nn.hpp"
#include "scgnn/seeds.hpp"
#include "scgnn/synthetic.hpp"
#include "scgnn/trainer.hpp"
