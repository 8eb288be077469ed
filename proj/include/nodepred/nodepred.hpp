#pragma once

// Umbrella header: pulls in the whole node-prediction library.

#include <nodepred/rng.hpp>
#include <nodepred/matrix.hpp>
#include <nodepred/graph.hpp>
#include <nodepred/graph_io.hpp>
#include <nodepred/synth.hpp>
#include <nodepred/examples.hpp>
#include <nodepred/nn.hpp>
#include <nodepred/gradcheck.hpp>
#include <nodepred/model.hpp>
#include <nodepred/train.hpp>
#include <nodepred/eval.hpp>
#include <nodepred/pipeline.hpp>
