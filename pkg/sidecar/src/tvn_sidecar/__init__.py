from .app import SidecarConfig, create_app
from .encoders import HashingTextEncoder, load_encoder

__version__ = "0.1.0"
