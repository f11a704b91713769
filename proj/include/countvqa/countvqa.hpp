#pragma once

// Everything except the HTTP adapter (include countvqa/http_adapter.hpp for
// that; it pulls in cpp-httplib).

#include "countvqa/analysis.hpp"
#include "countvqa/coco_ingest.hpp"
#include "countvqa/consistency.hpp"
#include "countvqa/errors.hpp"
#include "countvqa/metrics.hpp"
#include "countvqa/model_adapter.hpp"
#include "countvqa/question_gen.hpp"
#include "countvqa/response_parse.hpp"
#include "countvqa/run_eval.hpp"
#include "countvqa/sampler.hpp"
#include "countvqa/templates.hpp"
#include "countvqa/train_gen.hpp"
