// implementation forthcoming
namespace nca {}
