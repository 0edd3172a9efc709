#include "mapscope/error.hpp"

namespace mapscope {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateCommunity: return "DuplicateCommunity";
    case Errc::BadCategory: return "BadCategory";
    case Errc::BadSubclass: return "BadSubclass";
    case Errc::UnknownCommunity: return "UnknownCommunity";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyPost: return "EmptyPost";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ProviderError: return "ProviderError";
    case Errc::CacheCorrupt: return "CacheCorrupt";
    case Errc::BadVector: return "BadVector";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::BadK: return "BadK";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyTraining: return "EmptyTraining";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::BadDim: return "BadDim";
    case Errc::UnknownId: return "UnknownId";
    case Errc::EmptyRegion: return "EmptyRegion";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Malformed: return "Malformed";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mapscope
