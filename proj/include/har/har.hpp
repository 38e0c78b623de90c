#pragma once

// Everything except the HTTP client, which needs the har_http target.

#include "har/annotation.hpp"
#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/eval.hpp"
#include "har/grammar.hpp"
#include "har/grpo.hpp"
#include "har/inference.hpp"
#include "har/json_util.hpp"
#include "har/manifest.hpp"
#include "har/mock_corpus.hpp"
#include "har/mock_model.hpp"
#include "har/model_client.hpp"
#include "har/prompt_templates.hpp"
#include "har/random.hpp"
#include "har/records.hpp"
#include "har/reward.hpp"
#include "har/run_config.hpp"
#include "har/text_util.hpp"
#include "har/verdict.hpp"
