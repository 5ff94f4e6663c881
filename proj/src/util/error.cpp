#include "medvqa/error.hpp"

namespace medvqa {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Contract: return "contract";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Range: return "range";
        case ErrorKind::Config: return "config";
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Protocol: return "protocol";
        case ErrorKind::Content: return "content";
        case ErrorKind::Io: return "io";
        case ErrorKind::Integrity: return "integrity";
        case ErrorKind::Generation: return "generation";
    }
    return "unknown";
}

}  // namespace medvqa
