#ifndef INTERAREC_INTERAREC_HPP
#define INTERAREC_INTERAREC_HPP

#include "interarec/catalog.hpp"
#include "interarec/choice.hpp"
#include "interarec/constraints.hpp"
#include "interarec/error.hpp"
#include "interarec/eval.hpp"
#include "interarec/money.hpp"
#include "interarec/ranking.hpp"
#include "interarec/rerank.hpp"
#include "interarec/session.hpp"
#include "interarec/session_models.hpp"
#include "interarec/summarizer.hpp"

#endif  // INTERAREC_INTERAREC_HPP
