#pragma once

// Convenience include for the whole library.

#include "loclin/agreement.hpp"
#include "loclin/counterfactual.hpp"
#include "loclin/dataset.hpp"
#include "loclin/distance.hpp"
#include "loclin/evaluation.hpp"
#include "loclin/explainer.hpp"
#include "loclin/parallel.hpp"
#include "loclin/schema.hpp"
#include "loclin/surrogate.hpp"
