# Task modules
from .sweep_tasks import *
