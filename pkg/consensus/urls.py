from django.urls import path
from .views import FinalOrderView, StatusView, SyncView, TransactionView

urlpatterns = [
    path('sync/', SyncView.as_view(), name='sync'),
    path('transactions/', TransactionView.as_view(), name='transactions'),
    path('final-order/', FinalOrderView.as_view(), name='final-order'),
    path('status/', StatusView.as_view(), name='status'),
]
