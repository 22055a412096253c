#pragma once

#include "attacks.hpp"
#include "claims.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "execution.hpp"
#include "instantiate.hpp"
#include "knowledge.hpp"
#include "parse.hpp"
#include "protocol.hpp"
#include "report.hpp"
#include "restricted.hpp"
#include "tagging.hpp"
#include "term.hpp"
#include "transform.hpp"
