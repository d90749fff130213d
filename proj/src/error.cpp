#include "marshal/error.hpp"

namespace marshal {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::EmptyRegistry: return "EmptyRegistry";
        case Errc::Timeout: return "Timeout";
        case Errc::RateLimited: return "RateLimited";
        case Errc::ServerError: return "ServerError";
        case Errc::ClientError: return "ClientError";
        case Errc::MissingCredential: return "MissingCredential";
        case Errc::ScriptMiss: return "ScriptMiss";
        case Errc::CacheIoError: return "CacheIoError";
        case Errc::Unparseable: return "Unparseable";
        case Errc::BackendExhausted: return "BackendExhausted";
        case Errc::MissingImage: return "MissingImage";
        case Errc::DuplicateKind: return "DuplicateKind";
        case Errc::MalformedRecord: return "MalformedRecord";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::InvalidLabel: return "InvalidLabel";
        case Errc::MissingImageFile: return "MissingImageFile";
        case Errc::ExpectationMismatch: return "ExpectationMismatch";
        case Errc::MissingGold: return "MissingGold";
        case Errc::MissingPrediction: return "MissingPrediction";
        case Errc::ConfigError: return "ConfigError";
        case Errc::InvalidRequest: return "InvalidRequest";
    }
    return "Unknown";
}

}  // namespace marshal
