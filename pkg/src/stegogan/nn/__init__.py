from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check, grad_check_errors, kink_signature
from .layers import (AvgPool2d, BatchNorm2d, Conv2d, ConvTranspose2d, Gaussian, LeakyReLU, Linear,
                     ReflectPad2d, Reshape, Sequential, Sigmoid, Tanh)
from .optim import RMSProp
from .params import ParamStore
